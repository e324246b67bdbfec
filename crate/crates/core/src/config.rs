//! Experiment configuration in flat `key = value` text.
//!
//! `#` starts a comment; blank lines are ignored; unknown keys are rejected.
//! [`ExperimentConfig::to_text`] writes every key grouped under section
//! comments, and parsing that output yields the same config.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
pub use crate::protocol::Mode;
use crate::strategy::{MapMode, StrategyKind};
use crate::topology::{Area, TopologyParams};

/// PR occupancy probability: one value for all channels or one per channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Occupancy {
    Uniform(f64),
    PerChannel(Vec<f64>),
}

impl Occupancy {
    pub fn probabilities(&self, channels: usize) -> Vec<f64> {
        match self {
            Occupancy::Uniform(p) => vec![*p; channels],
            Occupancy::PerChannel(v) => v.clone(),
        }
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occupancy::Uniform(p) => write!(f, "{p}"),
            Occupancy::PerChannel(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for Occupancy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let values = parts
            .iter()
            .map(|p| p.parse::<f64>().map_err(|_| format!("bad probability `{p}`")))
            .collect::<Result<Vec<f64>, String>>()?;
        Ok(if values.len() == 1 {
            Occupancy::Uniform(values[0])
        } else {
            Occupancy::PerChannel(values)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mobility {
    Static,
    RandomWaypoint,
}

impl fmt::Display for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mobility::Static => "static",
            Mobility::RandomWaypoint => "random_waypoint",
        })
    }
}

impl FromStr for Mobility {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(Mobility::Static),
            "random_waypoint" => Ok(Mobility::RandomWaypoint),
            other => Err(format!(
                "unknown mobility `{other}` (expected static|random_waypoint)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // spectrum
    pub channels: usize,
    pub occupancy_prob: Occupancy,
    // topology
    pub area_width: f64,
    pub area_height: f64,
    pub cr_count: usize,
    pub pr_count: usize,
    pub cmr_count: usize,
    pub cr_range: f64,
    pub pr_range: f64,
    pub cmr_range: f64,
    pub portal_range: f64,
    pub backbone_range: f64,
    pub cr_radios: u8,
    pub cmr_radios: u8,
    pub placement_retries: usize,
    pub cr_mobility: Mobility,
    /// Meters per slot under random waypoint.
    pub cr_speed: f64,
    // strategy
    pub strategy: StrategyKind,
    pub cmr_map_mode: MapMode,
    pub busy_threshold: f64,
    // protocol
    pub mode: Mode,
    pub ttl_init: u8,
    pub sense_dwell: u64,
    pub forward_jitter: u64,
    pub queue_cap: usize,
    pub beacon_period: u64,
    pub scan_dwell: u64,
    pub pr_initial_data: u32,
    pub pr_data_rate: f64,
    // engine
    pub discovery_slots: u64,
    pub pickup_slots: u64,
    pub selection_rounds: u64,
    /// Length of the dissemination phase.
    pub slots: u64,
    pub messages: usize,
    pub message_interval: u64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channels: 15,
            occupancy_prob: Occupancy::Uniform(0.5),
            area_width: 1000.0,
            area_height: 1000.0,
            cr_count: 150,
            pr_count: 100,
            cmr_count: 5,
            cr_range: 150.0,
            pr_range: 150.0,
            cmr_range: 150.0,
            portal_range: 150.0,
            backbone_range: 300.0,
            cr_radios: 1,
            cmr_radios: 2,
            placement_retries: 10_000,
            cr_mobility: Mobility::Static,
            cr_speed: 1.0,
            strategy: StrategyKind::Surf,
            cmr_map_mode: MapMode::Standalone,
            busy_threshold: 0.5,
            mode: Mode::MultiHop,
            ttl_init: 8,
            sense_dwell: 1,
            forward_jitter: 3,
            queue_cap: 0,
            beacon_period: 4,
            scan_dwell: 4,
            pr_initial_data: 1,
            pr_data_rate: 0.0,
            discovery_slots: 60,
            pickup_slots: 20,
            selection_rounds: 5,
            slots: 400,
            messages: 10,
            message_interval: 40,
            seed: 1,
            replications: 30,
        }
    }
}

/// Every recognized key, grouped by section.
pub const SECTIONS: &[(&str, &[&str])] = &[
    ("spectrum", &["channels", "occupancy_prob"]),
    (
        "topology",
        &[
            "area_width",
            "area_height",
            "cr_count",
            "pr_count",
            "cmr_count",
            "cr_range",
            "pr_range",
            "cmr_range",
            "portal_range",
            "backbone_range",
            "cr_radios",
            "cmr_radios",
            "placement_retries",
            "cr_mobility",
            "cr_speed",
        ],
    ),
    ("strategy", &["strategy", "cmr_map_mode", "busy_threshold"]),
    (
        "protocol",
        &[
            "mode",
            "ttl_init",
            "sense_dwell",
            "forward_jitter",
            "queue_cap",
            "beacon_period",
            "scan_dwell",
            "pr_initial_data",
            "pr_data_rate",
        ],
    ),
    (
        "engine",
        &[
            "discovery_slots",
            "pickup_slots",
            "selection_rounds",
            "slots",
            "messages",
            "message_interval",
            "seed",
            "replications",
        ],
    ),
];

pub fn is_known_key(key: &str) -> bool {
    SECTIONS.iter().any(|(_, keys)| keys.contains(&key))
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e| Error::config(key, e))
}

impl ExperimentConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "channels" => self.channels = parse_field(key, v)?,
            "occupancy_prob" => self.occupancy_prob = parse_enum(key, v)?,
            "area_width" => self.area_width = parse_field(key, v)?,
            "area_height" => self.area_height = parse_field(key, v)?,
            "cr_count" => self.cr_count = parse_field(key, v)?,
            "pr_count" => self.pr_count = parse_field(key, v)?,
            "cmr_count" => self.cmr_count = parse_field(key, v)?,
            "cr_range" => self.cr_range = parse_field(key, v)?,
            "pr_range" => self.pr_range = parse_field(key, v)?,
            "cmr_range" => self.cmr_range = parse_field(key, v)?,
            "portal_range" => self.portal_range = parse_field(key, v)?,
            "backbone_range" => self.backbone_range = parse_field(key, v)?,
            "cr_radios" => self.cr_radios = parse_field(key, v)?,
            "cmr_radios" => self.cmr_radios = parse_field(key, v)?,
            "placement_retries" => self.placement_retries = parse_field(key, v)?,
            "cr_mobility" => self.cr_mobility = parse_enum(key, v)?,
            "cr_speed" => self.cr_speed = parse_field(key, v)?,
            "strategy" => self.strategy = parse_enum(key, v)?,
            "cmr_map_mode" => self.cmr_map_mode = parse_enum(key, v)?,
            "busy_threshold" => self.busy_threshold = parse_field(key, v)?,
            "mode" => self.mode = parse_enum(key, v)?,
            "ttl_init" => self.ttl_init = parse_field(key, v)?,
            "sense_dwell" => self.sense_dwell = parse_field(key, v)?,
            "forward_jitter" => self.forward_jitter = parse_field(key, v)?,
            "queue_cap" => self.queue_cap = parse_field(key, v)?,
            "beacon_period" => self.beacon_period = parse_field(key, v)?,
            "scan_dwell" => self.scan_dwell = parse_field(key, v)?,
            "pr_initial_data" => self.pr_initial_data = parse_field(key, v)?,
            "pr_data_rate" => self.pr_data_rate = parse_field(key, v)?,
            "discovery_slots" => self.discovery_slots = parse_field(key, v)?,
            "pickup_slots" => self.pickup_slots = parse_field(key, v)?,
            "selection_rounds" => self.selection_rounds = parse_field(key, v)?,
            "slots" => self.slots = parse_field(key, v)?,
            "messages" => self.messages = parse_field(key, v)?,
            "message_interval" => self.message_interval = parse_field(key, v)?,
            "seed" => self.seed = parse_field(key, v)?,
            "replications" => self.replications = parse_field(key, v)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Text form of one field.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "channels" => self.channels.to_string(),
            "occupancy_prob" => self.occupancy_prob.to_string(),
            "area_width" => self.area_width.to_string(),
            "area_height" => self.area_height.to_string(),
            "cr_count" => self.cr_count.to_string(),
            "pr_count" => self.pr_count.to_string(),
            "cmr_count" => self.cmr_count.to_string(),
            "cr_range" => self.cr_range.to_string(),
            "pr_range" => self.pr_range.to_string(),
            "cmr_range" => self.cmr_range.to_string(),
            "portal_range" => self.portal_range.to_string(),
            "backbone_range" => self.backbone_range.to_string(),
            "cr_radios" => self.cr_radios.to_string(),
            "cmr_radios" => self.cmr_radios.to_string(),
            "placement_retries" => self.placement_retries.to_string(),
            "cr_mobility" => self.cr_mobility.to_string(),
            "cr_speed" => self.cr_speed.to_string(),
            "strategy" => self.strategy.to_string(),
            "cmr_map_mode" => self.cmr_map_mode.to_string(),
            "busy_threshold" => self.busy_threshold.to_string(),
            "mode" => self.mode.to_string(),
            "ttl_init" => self.ttl_init.to_string(),
            "sense_dwell" => self.sense_dwell.to_string(),
            "forward_jitter" => self.forward_jitter.to_string(),
            "queue_cap" => self.queue_cap.to_string(),
            "beacon_period" => self.beacon_period.to_string(),
            "scan_dwell" => self.scan_dwell.to_string(),
            "pr_initial_data" => self.pr_initial_data.to_string(),
            "pr_data_rate" => self.pr_data_rate.to_string(),
            "discovery_slots" => self.discovery_slots.to_string(),
            "pickup_slots" => self.pickup_slots.to_string(),
            "selection_rounds" => self.selection_rounds.to_string(),
            "slots" => self.slots.to_string(),
            "messages" => self.messages.to_string(),
            "message_interval" => self.message_interval.to_string(),
            "seed" => self.seed.to_string(),
            "replications" => self.replications.to_string(),
            other => return Err(Error::config(other, "unknown key")),
        })
    }

    /// Parses config text over the defaults, returning the keys it set.
    pub fn parse_text(text: &str) -> Result<(ExperimentConfig, BTreeSet<String>)> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, format!("duplicate key on line {}", i + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok((cfg, seen))
    }

    pub fn from_text(text: &str) -> Result<ExperimentConfig> {
        Self::parse_text(text).map(|(c, _)| c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (section, keys)) in SECTIONS.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# --- {section} ---");
            for key in keys.iter() {
                let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
            }
        }
        out
    }

    /// Checks every field, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        }
        fn probability(key: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
            }
        }
        fn at_least<T: PartialOrd + fmt::Display>(key: &str, v: T, min: T) -> Result<()> {
            if v >= min {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be at least {min}, got {v}")))
            }
        }

        at_least("channels", self.channels, 1)?;
        if self.channels > u16::MAX as usize {
            return Err(Error::config("channels", "too many channels"));
        }
        match &self.occupancy_prob {
            Occupancy::Uniform(p) => probability("occupancy_prob", *p)?,
            Occupancy::PerChannel(v) => {
                if v.len() != self.channels {
                    return Err(Error::config(
                        "occupancy_prob",
                        format!("{} values for {} channels", v.len(), self.channels),
                    ));
                }
                for &p in v {
                    probability("occupancy_prob", p)?;
                }
            }
        }
        positive("area_width", self.area_width)?;
        positive("area_height", self.area_height)?;
        positive("cr_range", self.cr_range)?;
        positive("pr_range", self.pr_range)?;
        positive("cmr_range", self.cmr_range)?;
        positive("portal_range", self.portal_range)?;
        positive("backbone_range", self.backbone_range)?;
        at_least("cr_radios", self.cr_radios, 1)?;
        at_least("cmr_radios", self.cmr_radios, 2)?;
        at_least("placement_retries", self.placement_retries, 1)?;
        if !(self.cr_speed.is_finite() && self.cr_speed >= 0.0) {
            return Err(Error::config("cr_speed", "must be non-negative"));
        }
        probability("busy_threshold", self.busy_threshold)?;
        at_least("ttl_init", self.ttl_init, 1)?;
        at_least("sense_dwell", self.sense_dwell, 1)?;
        at_least("beacon_period", self.beacon_period, 1)?;
        at_least("scan_dwell", self.scan_dwell, 1)?;
        probability("pr_data_rate", self.pr_data_rate)?;
        at_least("slots", self.slots, 1)?;
        at_least("replications", self.replications, 1)?;
        Ok(())
    }

    pub fn topology(&self) -> TopologyParams {
        TopologyParams {
            area: Area {
                width: self.area_width,
                height: self.area_height,
            },
            cr_count: self.cr_count,
            pr_count: self.pr_count,
            cmr_count: self.cmr_count,
            portal_count: 1,
            channels: self.channels,
            cr_range: self.cr_range,
            pr_range: self.pr_range,
            cmr_range: self.cmr_range,
            portal_range: self.portal_range,
            backbone_range: self.backbone_range,
            cr_radios: self.cr_radios,
            cmr_radios: self.cmr_radios,
            max_retries: self.placement_retries,
        }
    }

    /// First slot of the dissemination phase.
    pub fn dissemination_start(&self) -> u64 {
        self.discovery_slots + self.pickup_slots + self.selection_rounds
    }
}
