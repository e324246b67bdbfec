//! Phase orchestration, metrics and replication.
//!
//! A replication runs, in slot order:
//!
//! 1. discovery (`discovery_slots`): CRs scan for PR beacons; CMRs sense all
//!    channels, CRs sense the channel they scan;
//! 2. pickup (`pickup_slots`): CRs collect PR data units;
//! 3. channel selection (`selection_rounds`, multi-hop only);
//! 4. dissemination (`slots`): message `k` becomes due at
//!    `start + k * message_interval` and is injected by a uniformly drawn CR
//!    holding PR data, or deferred to the next slot if none holds any.
//!
//! With no PR devices in the deployment, every CR can originate messages.
//!
//! Replication `r` uses seed [`replication_seed`]`(seed, r)`; deployment,
//! spectrum, data generation, protocol choices and mobility each draw from
//! their own [`substream`] of it.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{is_known_key, ExperimentConfig, Mobility};
use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId, Slot};
use crate::protocol::discovery::{
    discover_infrastructure, pickup_pr_data, BeaconSchedule, InfrastructureRegistry,
    PickupOutcome, PrDataSources, ScanPlan,
};
use crate::protocol::log::{Event, EventKind, EventLog};
use crate::protocol::network::{MessageRecord, Network, NetworkParams};
use crate::protocol::polling::{PollCoordinator, Poller};
use crate::protocol::{Message, Mode, MsgId};
use crate::rng::{replication_seed, substream};
use crate::spectrum::{nominal_frequency_mhz, ChannelModel, Spectrum, SpectrumObservation};
use crate::strategy::{cmr_assign_channels, MapMode, OpportunityMap, StrategyKind};
use crate::topology::{deploy_random, Deployment, Node, Point, Role};

const TAG_DEPLOY: u64 = 1;
const TAG_PROTOCOL: u64 = 2;
const TAG_SPECTRUM: u64 = 3;
const TAG_DATA: u64 = 4;
const TAG_MOBILITY: u64 = 5;

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub seed: u64,
    pub deployment: Deployment,
    pub records: Vec<MessageRecord>,
    pub collisions: u64,
    pub transmissions: u64,
    pub maps: Vec<OpportunityMap>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationMetrics {
    pub seed: u64,
    pub injected: usize,
    pub delivery_ratio_cmr_neighbor: f64,
    pub delivery_ratio_cmr: f64,
    pub delivery_ratio_portal: f64,
    pub mean_hops_to_cmr: Option<f64>,
    pub collision_count: u64,
}

impl Replication {
    pub fn metrics(&self) -> Result<ReplicationMetrics> {
        let n = self.records.len();
        if n == 0 {
            return Err(Error::UndefinedMetric("no message was injected"));
        }
        let ratio = |f: &dyn Fn(&MessageRecord) -> bool| {
            self.records.iter().filter(|r| f(r)).count() as f64 / n as f64
        };
        let hops: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.hops_to_cmr.map(f64::from))
            .collect();
        Ok(ReplicationMetrics {
            seed: self.seed,
            injected: n,
            delivery_ratio_cmr_neighbor: ratio(&|r| r.flags.reached_cmr_neighbor),
            delivery_ratio_cmr: ratio(&|r| r.flags.reached_cmr),
            delivery_ratio_portal: ratio(&|r| r.flags.reached_portal),
            mean_hops_to_cmr: (!hops.is_empty()).then(|| sorted_mean(&hops)),
            collision_count: self.collisions,
        })
    }
}

/// Mean of values summed in sorted order, so the result does not depend on
/// the order the values arrive in.
fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                sd: f64::NAN,
                n: 0,
            };
        }
        let mean = sorted_mean(values);
        let sd = if n > 1 {
            let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (sorted_mean(&sq) * n as f64 / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, sd, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub delivery_ratio_cmr_neighbor: Summary,
    pub delivery_ratio_cmr: Summary,
    pub delivery_ratio_portal: Summary,
    pub mean_hops_to_cmr: Summary,
    pub collision_count: Summary,
    pub injected: Summary,
    pub per_replication: Vec<ReplicationMetrics>,
}

impl RunMetrics {
    pub fn aggregate(per_replication: Vec<ReplicationMetrics>) -> RunMetrics {
        let col = |f: fn(&ReplicationMetrics) -> f64| -> Vec<f64> {
            per_replication.iter().map(f).collect()
        };
        let hops: Vec<f64> = per_replication
            .iter()
            .filter_map(|m| m.mean_hops_to_cmr)
            .collect();
        RunMetrics {
            delivery_ratio_cmr_neighbor: Summary::of(&col(|m| m.delivery_ratio_cmr_neighbor)),
            delivery_ratio_cmr: Summary::of(&col(|m| m.delivery_ratio_cmr)),
            delivery_ratio_portal: Summary::of(&col(|m| m.delivery_ratio_portal)),
            mean_hops_to_cmr: Summary::of(&hops),
            collision_count: Summary::of(&col(|m| m.collision_count as f64)),
            injected: Summary::of(&col(|m| m.injected as f64)),
            per_replication,
        }
    }
}

/// Runs every replication of `config` and aggregates the metrics.
pub fn run(config: &ExperimentConfig) -> Result<RunMetrics> {
    config.validate()?;
    let per: Vec<ReplicationMetrics> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            simulate(config, replication_seed(config.seed, r as u64), &mut EventLog::disabled())?
                .metrics()
        })
        .collect::<Result<_>>()?;
    Ok(RunMetrics::aggregate(per))
}

/// Average over logs of the fraction of injected messages that reached a
/// CMR or a geometric one-hop neighbor of one.
pub fn delivery_ratio_cmr_neighbor(logs: &[Vec<MessageRecord>]) -> Result<f64> {
    if logs.is_empty() {
        return Err(Error::UndefinedMetric("no replication"));
    }
    let ratios = logs
        .iter()
        .map(|records| {
            if records.is_empty() {
                return Err(Error::UndefinedMetric("no message was injected"));
            }
            Ok(records
                .iter()
                .filter(|r| r.flags.reached_cmr_neighbor)
                .count() as f64
                / records.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sorted_mean(&ratios))
}

struct Sensing {
    /// busy, observed per (node, channel) for CMRs.
    cmr_counts: Vec<Vec<(u64, u64)>>,
    /// Per-CR scan observations, used as coordinated feedback.
    cr_feedback: Vec<Vec<SpectrumObservation>>,
}

/// Runs one replication with the given seed.
pub fn simulate(config: &ExperimentConfig, seed: u64, log: &mut EventLog) -> Result<Replication> {
    config.validate()?;
    let deployment = deploy_random(&config.topology(), substream(seed, TAG_DEPLOY))?;
    let channels = ChannelModel::plan(&config.occupancy_prob.probabilities(config.channels))?;
    let spectrum = Spectrum::from_deployment(&deployment, channels, substream(seed, TAG_SPECTRUM))?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, TAG_PROTOCOL));
    let mut next_id: u32 = 0;

    let prs: Vec<Node> = deployment
        .nodes
        .iter()
        .filter(|n| n.role == Role::PrDevice)
        .cloned()
        .collect();
    let cr_ids: Vec<NodeId> = deployment.ids_with_role(Role::CrDevice).collect();
    let cmr_ids: Vec<NodeId> = deployment.ids_with_role(Role::Cmr).collect();

    // Discovery and sensing.
    let scan = ScanPlan {
        channels: config.channels,
        dwell: config.scan_dwell,
    };
    let beacons = BeaconSchedule {
        period: config.beacon_period,
    };
    let mut registries: Vec<InfrastructureRegistry> = deployment
        .nodes
        .iter()
        .map(|n| InfrastructureRegistry::new(n.id))
        .collect();
    let sensing = warm_up_sensing(config, &deployment, &spectrum, &scan);
    for t in 0..config.discovery_slots {
        for &cr in &cr_ids {
            let node = &deployment.nodes[cr.index()];
            let reg = &mut registries[cr.index()];
            let before = reg.entries().len();
            let heard = discover_infrastructure(node, t, &scan, &beacons, &prs, reg);
            if log.is_enabled() && reg.entries().len() > before {
                for pr in heard {
                    log.push(
                        Event::new(t, EventKind::Discover, cr)
                            .channel(scan.channel_at(t))
                            .peer(pr),
                    );
                }
            }
        }
    }

    let maps = build_maps(config, &deployment, &sensing)?;

    // Pickup.
    let mut held: Vec<Vec<Message>> = vec![Vec::new(); deployment.len()];
    let cr_originated = prs.is_empty();
    let mut sources = PrDataSources::new(
        &deployment.nodes,
        config.pr_initial_data,
        config.pr_data_rate,
        substream(seed, TAG_DATA),
    );
    let pickup_start = config.discovery_slots;
    for t in pickup_start..pickup_start + config.pickup_slots {
        sources.generate(&deployment.nodes, t);
        for &cr in &cr_ids {
            if !held[cr.index()].is_empty() {
                continue;
            }
            let node = &deployment.nodes[cr.index()];
            match pickup_pr_data(
                node,
                &registries[cr.index()],
                t,
                &spectrum,
                &mut sources,
                &mut next_id,
                config.ttl_init,
            )? {
                PickupOutcome::Picked(m) => {
                    log.push(
                        Event::new(t, EventKind::Pickup, cr)
                            .msg(m.id, m.ttl)
                            .peer(m.origin_pr.unwrap_or(cr)),
                    );
                    held[cr.index()].push(m);
                }
                PickupOutcome::Collision { pr, channel } => {
                    log.push(
                        Event::new(t, EventKind::PickupFail, cr)
                            .channel(channel)
                            .peer(pr),
                    );
                }
                PickupOutcome::EmptyRegistry | PickupOutcome::NoPendingData => {}
            }
        }
    }

    let params = NetworkParams {
        mode: config.mode,
        strategy: config.strategy,
        ttl_init: config.ttl_init,
        sense_dwell: config.sense_dwell,
        forward_jitter: config.forward_jitter,
        queue_cap: config.queue_cap,
    };
    let mut net = Network::new(deployment.clone(), &spectrum, params)?;

    for map in &maps {
        let listen: Vec<ChannelId> = map
            .ranked_channels()
            .into_iter()
            .take(config.cmr_radios as usize)
            .collect();
        net.set_cmr_listen(map.owner, listen);
    }

    let selection_start = pickup_start + config.pickup_slots;
    match config.mode {
        Mode::MultiHop => {
            for t in selection_start..selection_start + config.selection_rounds {
                net.select_residencies(t, &mut rng)?;
            }
        }
        Mode::SingleHop => {
            net.set_poll_coordinator(single_hop_polling(config, &deployment, &maps, &cmr_ids));
        }
    }

    // Dissemination.
    let start = config.dissemination_start();
    let mut mobility = (config.cr_mobility == Mobility::RandomWaypoint && config.cr_speed > 0.0)
        .then(|| Waypoints::new(&deployment, &cr_ids, substream(seed, TAG_MOBILITY)));
    let mut due = 0usize;
    let mut released = 0usize;
    for t in start..start + config.slots {
        if let Some(w) = mobility.as_mut() {
            w.advance(&mut net, config.cr_speed);
        }
        if released < config.messages
            && t - start >= released as u64 * config.message_interval
        {
            released += 1;
            due += 1;
        }
        while due > 0 {
            let msg = if cr_originated {
                if cr_ids.is_empty() {
                    break;
                }
                let cr = cr_ids[rng.gen_range(0..cr_ids.len())];
                let id = MsgId(next_id);
                next_id += 1;
                Message {
                    id,
                    origin_pr: None,
                    injector: cr,
                    ttl: config.ttl_init,
                    hop_trace: Vec::new(),
                }
            } else {
                let holders: Vec<NodeId> = cr_ids
                    .iter()
                    .copied()
                    .filter(|c| !held[c.index()].is_empty())
                    .collect();
                if holders.is_empty() {
                    break;
                }
                let cr = holders[rng.gen_range(0..holders.len())];
                held[cr.index()].remove(0)
            };
            net.inject(t, msg, log)?;
            due -= 1;
        }
        net.step(t, &mut rng, log)?;
        if released == config.messages && due == 0 && !net.has_pending() {
            break;
        }
    }

    let collisions = net.collisions();
    let transmissions = net.transmissions();
    Ok(Replication {
        seed,
        deployment,
        records: net.into_records(),
        collisions,
        transmissions,
        maps,
    })
}

fn warm_up_sensing(
    config: &ExperimentConfig,
    deployment: &Deployment,
    spectrum: &Spectrum,
    scan: &ScanPlan,
) -> Sensing {
    let c = config.channels;
    let mut cmr_counts = vec![Vec::new(); deployment.len()];
    let mut cr_feedback = vec![Vec::new(); deployment.len()];
    let end = config.discovery_slots;
    for n in &deployment.nodes {
        let view = spectrum.local_view(n.position, n.range);
        match n.role {
            Role::Cmr => {
                cmr_counts[n.id.index()] = ChannelId::all(c)
                    .map(|ch| {
                        let busy = (0..end).filter(|&t| view.busy(spectrum, ch, t)).count();
                        (busy as u64, end)
                    })
                    .collect();
            }
            Role::CrDevice if config.cmr_map_mode == MapMode::Coordinated => {
                let dwell = scan.dwell.max(1);
                let mut block = 0;
                while block < end {
                    let stop = (block + dwell).min(end);
                    let ch = scan.channel_at(block);
                    let busy = (block..stop).filter(|&t| view.busy(spectrum, ch, t)).count();
                    cr_feedback[n.id.index()].push(SpectrumObservation {
                        observer: n.id,
                        channel: ch,
                        busy_slots: busy as u64,
                        window: block..stop,
                        frequency_mhz: nominal_frequency_mhz(ch),
                    });
                    block = stop;
                }
            }
            _ => {}
        }
    }
    Sensing {
        cmr_counts,
        cr_feedback,
    }
}

fn build_maps(
    config: &ExperimentConfig,
    deployment: &Deployment,
    sensing: &Sensing,
) -> Result<Vec<OpportunityMap>> {
    let end = config.discovery_slots;
    let mut maps = Vec::new();
    for cmr in deployment.ids_with_role(Role::Cmr) {
        let mut map = OpportunityMap::new(cmr, config.cmr_map_mode, config.channels);
        if end > 0 {
            let own: Vec<SpectrumObservation> = sensing.cmr_counts[cmr.index()]
                .iter()
                .enumerate()
                .map(|(i, &(busy, _))| SpectrumObservation {
                    observer: cmr,
                    channel: ChannelId(i as u16),
                    busy_slots: busy,
                    window: 0..end,
                    frequency_mhz: nominal_frequency_mhz(ChannelId(i as u16)),
                })
                .collect();
            map.ingest(&own)?;
        }
        if config.cmr_map_mode == MapMode::Coordinated {
            for cr in deployment.neighbors(cmr)? {
                map.ingest(&sensing.cr_feedback[cr.index()])?;
            }
        }
        maps.push(map);
    }
    Ok(maps)
}

/// Each CR associates with the nearest CMR it hears (lowest id on ties); each
/// CMR assigns channels to its CRs from its map.
fn single_hop_polling(
    config: &ExperimentConfig,
    deployment: &Deployment,
    maps: &[OpportunityMap],
    cmr_ids: &[NodeId],
) -> PollCoordinator {
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); deployment.len()];
    for cr in deployment.ids_with_role(Role::CrDevice) {
        let node = &deployment.nodes[cr.index()];
        let nearest = cmr_ids
            .iter()
            .map(|&m| &deployment.nodes[m.index()])
            .filter(|m| node.hears(m))
            .min_by(|a, b| {
                let da = a.position.distance(&node.position);
                let db = b.position.distance(&node.position);
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            });
        if let Some(m) = nearest {
            members[m.id.index()].push(cr);
        }
    }
    let pollers = maps
        .iter()
        .filter_map(|map| {
            let crs = &members[map.owner.index()];
            if crs.is_empty() {
                return None;
            }
            cmr_assign_channels(map, crs, config.busy_threshold)
                .ok()
                .map(|a| Poller::new(map.owner, &a, config.cmr_radios as usize))
        })
        .collect();
    PollCoordinator::new(pollers)
}

/// Random-waypoint motion for CR devices.
struct Waypoints {
    rng: ChaCha8Rng,
    targets: Vec<(NodeId, Point)>,
    area: crate::topology::Area,
}

impl Waypoints {
    fn new(deployment: &Deployment, crs: &[NodeId], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let area = deployment.area;
        let targets = crs.iter().map(|&c| (c, area.sample(&mut rng))).collect();
        Waypoints { rng, targets, area }
    }

    fn advance(&mut self, net: &mut Network<'_>, speed: f64) {
        for (cr, target) in &mut self.targets {
            let here = net.deployment().nodes[cr.index()].position;
            let d = here.distance(target);
            let next = if d <= speed {
                let arrived = *target;
                *target = self.area.sample(&mut self.rng);
                arrived
            } else {
                Point::new(
                    here.x + (target.x - here.x) * speed / d,
                    here.y + (target.y - here.y) * speed / d,
                )
            };
            net.set_position(*cr, next);
        }
        net.refresh_geometry();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub strategy: StrategyKind,
    pub channels: usize,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str = "axis,value,strategy,channels,replications,injected_mean,\
dr_cmr_neighbor_mean,dr_cmr_neighbor_sd,dr_cmr_mean,dr_cmr_sd,dr_portal_mean,dr_portal_sd,\
hops_to_cmr_mean,hops_to_cmr_sd,collisions_mean,collisions_sd";

impl SweepTable {
    pub fn single(value: &str, config: &ExperimentConfig, metrics: RunMetrics) -> SweepTable {
        SweepTable {
            rows: vec![SweepRow {
                axis: "none".into(),
                value: value.into(),
                strategy: config.strategy,
                channels: config.channels,
                metrics,
            }],
        }
    }

    pub fn extend(&mut self, other: SweepTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.axis,
                r.value,
                r.strategy,
                r.channels,
                m.per_replication.len(),
                m.injected.mean,
                m.delivery_ratio_cmr_neighbor.mean,
                m.delivery_ratio_cmr_neighbor.sd,
                m.delivery_ratio_cmr.mean,
                m.delivery_ratio_cmr.sd,
                m.delivery_ratio_portal.mean,
                m.delivery_ratio_portal.sd,
                m.mean_hops_to_cmr.mean,
                m.mean_hops_to_cmr.sd,
                m.collision_count.mean,
                m.collision_count.sd,
            );
        }
        out
    }

    /// Wide whitespace-separated layout: one row per axis value, one
    /// `dr_cmr_neighbor` mean column per `strategy x channels` series, in
    /// first-appearance order.
    pub fn to_series_data(&self) -> String {
        let mut series: Vec<(StrategyKind, usize)> = Vec::new();
        let mut values: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !series.contains(&(r.strategy, r.channels)) {
                series.push((r.strategy, r.channels));
            }
            if !values.contains(&r.value.as_str()) {
                values.push(&r.value);
            }
        }
        let axis = self.rows.first().map_or("value", |r| r.axis.as_str());
        let mut out = format!("# {axis}");
        for (s, c) in &series {
            let _ = write!(out, " {s}_ch{c}");
        }
        out.push('\n');
        for v in values {
            out.push_str(v);
            for (s, c) in &series {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.value == v && r.strategy == *s && r.channels == *c)
                    .map_or_else(
                        || "NaN".to_string(),
                        |r| format!("{:.6}", r.metrics.delivery_ratio_cmr_neighbor.mean),
                    );
                let _ = write!(out, " {cell}");
            }
            out.push('\n');
        }
        out
    }
}

/// One row per value of `axis`, all other fields (including the seed) held
/// at `base`.
pub fn sweep(base: &ExperimentConfig, axis: &str, values: &[String]) -> Result<SweepTable> {
    if !is_known_key(axis) {
        return Err(Error::config(axis, "unknown sweep axis"));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(axis, v)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, v)| {
            Ok(SweepRow {
                axis: axis.to_string(),
                value: v.clone(),
                strategy: cfg.strategy,
                channels: cfg.channels,
                metrics: run(cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// [`sweep`] repeated for each `(strategy, channels)` series.
pub fn sweep_series(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
    series: &[(StrategyKind, usize)],
) -> Result<SweepTable> {
    let mut table = SweepTable::default();
    for &(strategy, channels) in series {
        let mut cfg = base.clone();
        cfg.strategy = strategy;
        cfg.channels = channels;
        table.extend(sweep(&cfg, axis, values)?);
    }
    Ok(table)
}

/// Slot at which the dissemination phase of `config` ends.
pub fn horizon(config: &ExperimentConfig) -> Slot {
    config.dissemination_start() + config.slots
}
