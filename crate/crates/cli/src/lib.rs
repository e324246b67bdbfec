//! Command-line front end for `crdrn-core`.
//!
//! Exit codes: 0 success, 1 config, usage or parse error, 2 I/O error,
//! 3 replay found violations.

pub mod replay;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use crdrn_core::engine::{self, SweepTable};
use crdrn_core::protocol::log::{parse_log, EventLog};
use crdrn_core::rng::replication_seed;
use crdrn_core::{Deployment, ExperimentConfig, StrategyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VIOLATIONS: i32 = 3;

/// Seed used when neither `--seed` nor the config file sets one.
pub const SEED_ENV: &str = "CRDRN_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crdrn_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("replay found {0} violation(s)")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Violations(_) => EXIT_VIOLATIONS,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "crdrn", version, about = "Cognitive radio disaster-response network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write `run.csv`.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write `deployment.txt` and `events.log` for replication 0.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep one config key and write `sweep.csv` and `sweep.dat`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config key to vary.
        #[arg(long)]
        axis: String,
        /// `a:b` (integers, inclusive), `a:b:step`, or a comma list.
        #[arg(long)]
        values: String,
        /// Comma list of `strategy:channels` pairs, e.g. `surf:5,rd:15`.
        #[arg(long)]
        series: Option<String>,
    },
    /// Check a config and print it in canonical form.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Verify an event log against its deployment.
    Replay {
        #[arg(long)]
        deployment: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long = "cmr-count")]
    pub cmr_count: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub replications: Option<String>,
    #[arg(long)]
    pub ttl: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl Common {
    /// File values, then `CRDRN_SEED` if no seed was given, then `--set`,
    /// then the named flags.
    pub fn resolve(&self, env_seed: Option<&str>) -> Result<ExperimentConfig, CliError> {
        let (mut cfg, keys) = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                ExperimentConfig::parse_text(&text)?
            }
            None => (ExperimentConfig::default(), Default::default()),
        };
        if self.seed.is_none() && !keys.contains("seed") {
            if let Some(s) = env_seed {
                cfg.set("seed", s).map_err(|e| {
                    CliError::Usage(format!("{SEED_ENV}: {e}"))
                })?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("channels", &self.channels),
            ("strategy", &self.strategy),
            ("cmr_count", &self.cmr_count),
            ("seed", &self.seed),
            ("replications", &self.replications),
            ("ttl_init", &self.ttl),
            ("mode", &self.mode),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Expands a `--values` argument.
pub fn parse_values(spec: &str) -> Result<Vec<String>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse --values `{spec}`"));
    let spec = spec.trim();
    if spec.contains(',') || !spec.contains(':') {
        let out: Vec<String> = spec
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        return if out.is_empty() { Err(bad()) } else { Ok(out) };
    }
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts[..] {
        [a, b] => {
            let a: i64 = a.parse().map_err(|_| bad())?;
            let b: i64 = b.parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).map(|v| v.to_string()).collect())
        }
        [a, b, step] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let step: f64 = step.parse().map_err(|_| bad())?;
            if step.is_nan() || step <= 0.0 || a > b || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| {
                    let v = a + i as f64 * step;
                    format!("{}", (v * 1e9).round() / 1e9)
                })
                .collect())
        }
        _ => Err(bad()),
    }
}

pub fn parse_series(spec: &str) -> Result<Vec<(StrategyKind, usize)>, CliError> {
    spec.split(',')
        .map(|item| {
            let bad = || CliError::Usage(format!("series entry `{item}` is not strategy:channels"));
            let (s, c) = item.trim().split_once(':').ok_or_else(bad)?;
            let s: StrategyKind = s.trim().parse().map_err(|_| bad())?;
            let c: usize = c.trim().parse().map_err(|_| bad())?;
            Ok((s, c))
        })
        .collect()
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn cmd_run(common: &Common, trace: bool, env_seed: Option<&str>) -> Result<String, CliError> {
    let cfg = common.resolve(env_seed)?;
    let metrics = engine::run(&cfg)?;
    let m = &metrics;
    let summary = format!(
        "delivery_ratio_cmr_neighbor {:.6} (sd {:.6})\ndelivery_ratio_cmr {:.6} (sd {:.6})\ndelivery_ratio_portal {:.6} (sd {:.6})\n",
        m.delivery_ratio_cmr_neighbor.mean,
        m.delivery_ratio_cmr_neighbor.sd,
        m.delivery_ratio_cmr.mean,
        m.delivery_ratio_cmr.sd,
        m.delivery_ratio_portal.mean,
        m.delivery_ratio_portal.sd,
    );
    let table = SweepTable::single("-", &cfg, metrics);
    write_atomic(&common.out.join("run.csv"), &table.to_csv())?;
    if trace {
        let mut log = EventLog::enabled();
        let rep = engine::simulate(&cfg, replication_seed(cfg.seed, 0), &mut log)?;
        write_atomic(&common.out.join("deployment.txt"), &rep.deployment.to_text())?;
        write_atomic(&common.out.join("events.log"), &log.to_text())?;
    }
    Ok(summary)
}

fn cmd_sweep(
    common: &Common,
    axis: &str,
    values: &str,
    series: Option<&str>,
    env_seed: Option<&str>,
) -> Result<String, CliError> {
    let cfg = common.resolve(env_seed)?;
    let values = parse_values(values)?;
    let table = match series {
        Some(s) => engine::sweep_series(&cfg, axis, &values, &parse_series(s)?)?,
        None => engine::sweep(&cfg, axis, &values)?,
    };
    write_atomic(&common.out.join("sweep.csv"), &table.to_csv())?;
    write_atomic(&common.out.join("sweep.dat"), &table.to_series_data())?;
    Ok(format!("{} rows\n", table.rows.len()))
}

fn cmd_replay(deployment: &Path, log: &Path, report: Option<&Path>) -> Result<String, CliError> {
    let dep_text = fs::read_to_string(deployment).map_err(io_err(deployment))?;
    let log_text = fs::read_to_string(log).map_err(io_err(log))?;
    let dep = Deployment::from_text(&dep_text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", deployment.display())))?;
    let events = parse_log(&log_text).map_err(|e| CliError::Usage(format!("{}: {e}", log.display())))?;
    let rep = replay::replay(&dep, &events);
    let text = rep.to_text();
    if let Some(path) = report {
        write_atomic(path, &text)?;
    }
    if rep.is_clean() {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Violations(rep.violations.len()))
    }
}

/// Runs a parsed command, returning what to print on success.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<String, CliError> {
    match &cli.command {
        Command::Run { common, trace } => cmd_run(common, *trace, env_seed),
        Command::Sweep {
            common,
            axis,
            values,
            series,
        } => cmd_sweep(common, axis, values, series.as_deref(), env_seed),
        Command::Validate { common } => Ok(common.resolve(env_seed)?.to_text()),
        Command::Replay {
            deployment,
            log,
            report,
        } => cmd_replay(deployment, log, report.as_deref()),
    }
}

/// Full entry point: parses `argv`, runs, prints, returns the exit code.
pub fn main_with<I, T>(argv: I, env_seed: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli, env_seed) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
