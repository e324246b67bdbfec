//! Property bodies shared by the property suite and the acceptance report.

use std::collections::{BTreeMap, BTreeSet};

use crdrn_core::engine::{self, simulate};
use crdrn_core::protocol::log::{Event, EventKind, EventLog};
use crdrn_core::protocol::network::{Network, NetworkParams};
use crdrn_core::protocol::{Message, Mode, MsgId};
use crdrn_core::rng::replication_seed;
use crdrn_core::spectrum::{nominal_frequency_mhz, ChannelModel, Spectrum, SpectrumObservation};
use crdrn_core::strategy::{select_channel_surf, OpportunityMap};
use crdrn_core::topology::{deploy_random, Area};
use crdrn_core::{
    ChannelId, Deployment, ExperimentConfig, MapMode, Node, NodeId, Occupancy, Point, Role,
    StrategyKind,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// A denser random network than the oracle cases, run for 16 slots with
/// jitter and either strategy.
pub fn random_run(seed: u64) -> (Deployment, Spectrum, Vec<Event>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=14);
    let c: usize = rng.gen_range(1..=3);
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let role = match rng.gen_range(0..10) {
                0..=5 => Role::CrDevice,
                6..=7 => Role::Cmr,
                8 => Role::PrDevice,
                _ => Role::Portal,
            };
            Node {
                id: NodeId(i),
                role,
                position: Point::new(rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)),
                range: rng.gen_range(10.0..35.0),
                radio_count: 1,
                channel: (role == Role::PrDevice).then(|| ChannelId(rng.gen_range(0..c) as u16)),
            }
        })
        .collect();
    let dep = Deployment {
        area: Area {
            width: 60.0,
            height: 60.0,
        },
        seed,
        backbone_range: rng.gen_range(10.0..60.0),
        nodes,
    };
    let probs: Vec<f64> = (0..c).map(|_| rng.gen_range(0.0..1.0)).collect();
    let spectrum =
        Spectrum::from_deployment(&dep, ChannelModel::plan(&probs).unwrap(), rng.gen()).unwrap();
    let strategy = if rng.gen_bool(0.5) {
        StrategyKind::Surf
    } else {
        StrategyKind::Random
    };
    let params = NetworkParams {
        mode: Mode::MultiHop,
        strategy,
        ttl_init: 6,
        sense_dwell: rng.gen_range(1..=4),
        forward_jitter: rng.gen_range(0..=2),
        queue_cap: 0,
    };
    let crs: Vec<NodeId> = dep.ids_with_role(Role::CrDevice).collect();
    let cmrs: Vec<NodeId> = dep.ids_with_role(Role::Cmr).collect();
    let mut net = Network::new(dep.clone(), &spectrum, params).unwrap();
    for &cr in &crs {
        net.set_tuned(cr, Some(ChannelId(rng.gen_range(0..c) as u16)));
    }
    for &m in &cmrs {
        net.set_cmr_listen(m, vec![ChannelId(rng.gen_range(0..c) as u16)]);
    }
    let mut log = EventLog::enabled();
    let mut next = 0;
    for t in 0..16 {
        if !crs.is_empty() && t % 3 == 0 {
            let injector = crs[rng.gen_range(0..crs.len())];
            net.inject(
                t,
                Message {
                    id: MsgId(next),
                    origin_pr: None,
                    injector,
                    ttl: rng.gen_range(1..=6),
                    hop_trace: Vec::new(),
                },
                &mut log,
            )
            .unwrap();
            next += 1;
        }
        net.step(t, &mut rng, &mut log).unwrap();
    }
    let events = log.into_events();
    (dep, spectrum, events)
}

fn is_reception(kind: EventKind) -> bool {
    matches!(kind, EventKind::Rx | EventKind::CmrRx)
}

pub fn ttl_never_increases(seed: u64) -> Result<(), TestCaseError> {
    let (_, _, events) = random_run(seed);
    // ttl of each node's copy of each message
    let mut copy: BTreeMap<(MsgId, NodeId), u8> = BTreeMap::new();
    let mut sent: BTreeMap<(u64, NodeId), u8> = BTreeMap::new();
    for e in &events {
        match e.kind {
            EventKind::Inject => {
                copy.insert((e.msg.unwrap(), e.node), e.ttl.unwrap());
            }
            EventKind::Tx => {
                let ttl = e.ttl.unwrap();
                prop_assert!(ttl >= 1, "transmission with ttl 0");
                let held = copy.get(&(e.msg.unwrap(), e.node));
                prop_assert_eq!(held, Some(&ttl));
                sent.insert((e.slot, e.node), ttl);
            }
            k if is_reception(k) || k == EventKind::Dup => {
                let from = sent[&(e.slot, e.peer.unwrap())];
                prop_assert_eq!(e.ttl.unwrap() + 1, from);
                if k == EventKind::Rx {
                    copy.insert((e.msg.unwrap(), e.node), e.ttl.unwrap());
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn duplicates_are_suppressed(seed: u64) -> Result<(), TestCaseError> {
    let (_, _, events) = random_run(seed);
    let mut tx = BTreeSet::new();
    let mut accepted = BTreeSet::new();
    for e in &events {
        let key = (e.msg, e.node);
        match e.kind {
            EventKind::Tx => prop_assert!(tx.insert(key), "{:?} forwarded twice", key),
            EventKind::Inject => prop_assert!(accepted.insert(key)),
            k if is_reception(k) => prop_assert!(accepted.insert(key), "{:?} accepted twice", key),
            EventKind::Dup => prop_assert!(accepted.contains(&key)),
            _ => {}
        }
    }
    Ok(())
}

pub fn primary_activity_blocks_reception(seed: u64) -> Result<(), TestCaseError> {
    let (dep, spectrum, events) = random_run(seed);
    for e in &events {
        let listener = &dep.nodes[e.node.index()];
        let busy = |e: &Event| {
            spectrum.channel_busy(e.channel.unwrap(), e.slot, listener.position, listener.range)
        };
        if is_reception(e.kind) || e.kind == EventKind::Dup {
            prop_assert!(!busy(e), "reception at {} under PR activity", e.node);
        }
        if e.kind == EventKind::PrBlock {
            prop_assert!(busy(e));
        }
    }
    Ok(())
}

pub fn receptions_have_a_lone_sender(seed: u64) -> Result<(), TestCaseError> {
    let (dep, _, events) = random_run(seed);
    for e in events.iter().filter(|e| is_reception(e.kind)) {
        let senders = events
            .iter()
            .filter(|t| t.kind == EventKind::Tx && t.slot == e.slot && t.channel == e.channel)
            .filter(|t| {
                let (a, b) = (&dep.nodes[t.node.index()], &dep.nodes[e.node.index()]);
                a.position.distance(&b.position) <= a.range.min(b.range)
            })
            .count();
        prop_assert_eq!(senders, 1);
    }
    Ok(())
}

pub fn tiny_config(seed: u64) -> ExperimentConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = ExperimentConfig::default();
    c.seed = seed;
    c.channels = rng.gen_range(1..=5);
    c.cr_count = rng.gen_range(1..=25);
    c.pr_count = rng.gen_range(0..=10);
    c.cmr_count = rng.gen_range(0..=3);
    c.area_width = 500.0;
    c.area_height = 500.0;
    c.occupancy_prob = Occupancy::Uniform(rng.gen_range(0.0..1.0));
    c.strategy = if rng.gen_bool(0.5) {
        StrategyKind::Surf
    } else {
        StrategyKind::Random
    };
    c.mode = if rng.gen_bool(0.8) {
        Mode::MultiHop
    } else {
        Mode::SingleHop
    };
    c.cmr_map_mode = if rng.gen_bool(0.5) {
        MapMode::Standalone
    } else {
        MapMode::Coordinated
    };
    c.ttl_init = rng.gen_range(1..=6);
    c.discovery_slots = 12;
    c.pickup_slots = 6;
    c.slots = 40;
    c.messages = 3;
    c.message_interval = 5;
    c.replications = 1;
    c
}

pub fn delivery_ratios_are_ordered(seed: u64) -> Result<(), TestCaseError> {
    let c = tiny_config(seed);
    let rep = simulate(&c, replication_seed(seed, 0), &mut EventLog::disabled()).unwrap();
    if let Ok(m) = rep.metrics() {
        prop_assert!(m.delivery_ratio_portal <= m.delivery_ratio_cmr);
        prop_assert!(m.delivery_ratio_cmr <= m.delivery_ratio_cmr_neighbor);
        prop_assert!(m.delivery_ratio_cmr_neighbor <= 1.0);
    }
    Ok(())
}

pub type SurfCells = Vec<(u32, u32, u32)>;

pub fn surf_cells() -> impl Strategy<Value = SurfCells> {
    prop::collection::vec((0u32..=20, 1u32..=20, 0u32..50), 1..16)
}

/// `cells` are `(busy, window, receivers)`; checked against exact rationals.
pub fn surf_picks_a_heaviest_channel(cells: SurfCells) -> Result<(), TestCaseError> {
    let u: Vec<f64> = cells
        .iter()
        .map(|&(b, d, _)| b.min(d) as f64 / d as f64)
        .collect();
    let r: Vec<u32> = cells.iter().map(|c| c.2).collect();
    let got = select_channel_surf(&u, &r).unwrap().index();
    let num = |i: usize| {
        let (b, d, r) = cells[i];
        ((d - b.min(d)) as u128 * r as u128, d as u128)
    };
    let cmp = |i: usize, j: usize| {
        let ((a, da), (b, db)) = (num(i), num(j));
        (a * db).cmp(&(b * da))
    };
    if (0..u.len()).any(|i| num(i).0 > 0) {
        for j in 0..u.len() {
            prop_assert!(cmp(j, got).is_le(), "channel {} beats {}", j, got);
            if j < got {
                prop_assert!(cmp(j, got).is_lt(), "tie not broken to lowest id");
            }
        }
    } else {
        for j in 0..u.len() {
            prop_assert!(u[j] >= u[got]);
            if j < got {
                prop_assert!(u[j] > u[got]);
            }
        }
    }
    Ok(())
}

pub fn scale_cells() -> impl Strategy<Value = (Vec<(f64, u32)>, u32)> {
    (
        prop::collection::vec((0.0f64..=1.0, 0u32..200), 1..16),
        1u32..1000,
    )
}

pub fn surf_is_invariant_to_receiver_scale(
    (cells, k): (Vec<(f64, u32)>, u32),
) -> Result<(), TestCaseError> {
    let u: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let r: Vec<u32> = cells.iter().map(|c| c.1).collect();
    let scaled: Vec<u32> = r.iter().map(|&x| x * k).collect();
    prop_assert_eq!(
        select_channel_surf(&u, &r).unwrap(),
        select_channel_surf(&u, &scaled).unwrap()
    );
    Ok(())
}

pub type MapInput = (Vec<(u16, u64, u64, u32)>, prop::sample::Index, u64);

pub fn map_inputs() -> impl Strategy<Value = MapInput> {
    (
        prop::collection::vec((0u16..4, 0u64..50, 1u64..50, 0u32..3), 0..30),
        any::<prop::sample::Index>(),
        any::<u64>(),
    )
}

pub fn opportunity_map_ignores_order((obs, split, perm_seed): MapInput) -> Result<(), TestCaseError> {
    let observations: Vec<SpectrumObservation> = obs
        .iter()
        .enumerate()
        .map(|(i, &(ch, busy, len, who))| {
            let start = i as u64 * 7;
            SpectrumObservation {
                observer: NodeId(who),
                channel: ChannelId(ch),
                busy_slots: busy.min(len),
                window: start..start + len,
                frequency_mhz: nominal_frequency_mhz(ChannelId(ch)),
            }
        })
        .collect();
    let mut shuffled = observations.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.gen_range(0..=i));
    }
    let mut a = OpportunityMap::new(NodeId(0), MapMode::Coordinated, 4);
    a.ingest(&observations).unwrap();
    let mut b = OpportunityMap::new(NodeId(0), MapMode::Coordinated, 4);
    let cut = if shuffled.is_empty() {
        0
    } else {
        split.index(shuffled.len())
    };
    b.ingest(&shuffled[..cut]).unwrap();
    b.ingest(&shuffled[cut..]).unwrap();
    for ch in ChannelId::all(4) {
        prop_assert_eq!(a.estimate(ch), b.estimate(ch));
        let (ra, rb) = (a.record(ch).unwrap(), b.record(ch).unwrap());
        prop_assert_eq!(ra.busy_slots, rb.busy_slots);
        prop_assert_eq!(ra.sample_count, rb.sample_count);
        prop_assert_eq!(ra.last_updated, rb.last_updated);
    }
    Ok(())
}

pub fn deployment_inputs() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 0usize..60, 0usize..6)
}

pub fn deployment_is_a_function_of_seed(
    (seed, crs, cmrs): (u64, usize, usize),
) -> Result<(), TestCaseError> {
    let mut c = ExperimentConfig::default();
    c.cr_count = crs;
    c.cmr_count = cmrs;
    c.pr_count = 20;
    let p = c.topology();
    let a = deploy_random(&p, seed).unwrap();
    let b = deploy_random(&p, seed).unwrap();
    prop_assert_eq!(&a, &b);
    prop_assert_eq!(Deployment::from_text(&a.to_text()).unwrap(), a);
    Ok(())
}

pub fn csv_is_byte_deterministic(seed: u64) -> Result<(), TestCaseError> {
    let mut c = tiny_config(seed);
    c.mode = Mode::MultiHop;
    c.pr_count = 0;
    c.replications = 2;
    let values = vec!["1".to_string(), "2".to_string()];
    let a = engine::sweep(&c, "cmr_count", &values).unwrap().to_csv();
    let b = engine::sweep(&c, "cmr_count", &values).unwrap().to_csv();
    prop_assert_eq!(a, b);
    Ok(())
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(config(cases));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Every property with `cases` cases each, by name.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("ttl safety", check(cases, any::<u64>(), ttl_never_increases)),
        ("duplicate suppression", check(cases, any::<u64>(), duplicates_are_suppressed)),
        ("PR-priority reception", check(cases, any::<u64>(), primary_activity_blocks_reception)),
        ("single in-range sender per reception", check(cases, any::<u64>(), receptions_have_a_lone_sender)),
        ("metric ordering", check(cases, any::<u64>(), delivery_ratios_are_ordered)),
        ("SURF argmax", check(cases, surf_cells(), surf_picks_a_heaviest_channel)),
        ("SURF receiver-scale invariance", check(cases, scale_cells(), surf_is_invariant_to_receiver_scale)),
        ("opportunity map order independence", check(cases, map_inputs(), opportunity_map_ignores_order)),
        ("deployment determinism", check(cases, deployment_inputs(), deployment_is_a_function_of_seed)),
        ("CSV byte determinism", check(cases, any::<u64>(), csv_is_byte_deterministic)),
    ]
}
