#![allow(dead_code)]

pub mod oracle;
pub mod props;

use std::collections::BTreeSet;

use crdrn_core::protocol::log::EventLog;
use crdrn_core::protocol::network::{Network, NetworkParams};
use crdrn_core::protocol::{Message, Mode, MsgId, Terminal};
use crdrn_core::spectrum::{ChannelModel, Spectrum};
use crdrn_core::topology::Area;
use crdrn_core::{ChannelId, Deployment, Node, NodeId, Point, Role, StrategyKind};
use rand::rngs::mock::StepRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracle::{Case, Fate, Kind, ONode};

/// A random small case: 2..=5 nodes, 1..=2 channels, `slots` dissemination slots.
pub fn random_case(seed: u64, slots: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let c = rng.gen_range(1..=2);
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let occupancy = (0..c).map(|_| levels[rng.gen_range(0..levels.len())]).collect();
    let mut nodes: Vec<ONode> = (0..n)
        .map(|_| {
            let kind = match rng.gen_range(0..10) {
                0..=4 => Kind::Cr,
                5..=6 => Kind::Cmr,
                7..=8 => Kind::Pr,
                _ => Kind::Portal,
            };
            ONode {
                kind,
                x: rng.gen_range(0..=30),
                y: rng.gen_range(0..=30),
                range: rng.gen_range(5..=25),
                channel: rng.gen_range(0..c),
            }
        })
        .collect();
    if !nodes.iter().any(|n| n.kind == Kind::Cr) {
        let k = rng.gen_range(0..n);
        nodes[k].kind = Kind::Cr;
    }
    let tuned = nodes
        .iter()
        .map(|nd| (nd.kind == Kind::Cr && rng.gen_bool(0.8)).then(|| rng.gen_range(0..c)))
        .collect();
    let listen = nodes
        .iter()
        .map(|nd| {
            if nd.kind != Kind::Cmr {
                return Vec::new();
            }
            (0..c).filter(|_| rng.gen_bool(0.7)).collect()
        })
        .collect();
    let crs: Vec<usize> = (0..n).filter(|&k| nodes[k].kind == Kind::Cr).collect();
    let first_slot = rng.gen_range(0..8);
    let messages = rng.gen_range(1..=2);
    let injections = (0..messages)
        .map(|_| {
            (
                first_slot + rng.gen_range(0..2),
                crs[rng.gen_range(0..crs.len())],
                rng.gen_range(1..=4),
            )
        })
        .collect::<Vec<_>>();
    let mut injections = injections;
    injections.sort_by_key(|i| i.0);
    Case {
        nodes,
        occupancy,
        spectrum_seed: rng.gen(),
        backbone_range: rng.gen_range(5..=40),
        sense_dwell: rng.gen_range(1..=3),
        tuned,
        listen,
        injections,
        first_slot,
        slots,
    }
}

pub fn deployment_of(case: &Case) -> Deployment {
    let nodes = case
        .nodes
        .iter()
        .enumerate()
        .map(|(i, nd)| Node {
            id: NodeId(i as u32),
            role: match nd.kind {
                Kind::Cr => Role::CrDevice,
                Kind::Cmr => Role::Cmr,
                Kind::Pr => Role::PrDevice,
                Kind::Portal => Role::Portal,
            },
            position: Point::new(nd.x as f64, nd.y as f64),
            range: nd.range as f64,
            radio_count: 1,
            channel: (nd.kind == Kind::Pr).then_some(ChannelId(nd.channel as u16)),
        })
        .collect();
    Deployment {
        area: Area {
            width: 30.0,
            height: 30.0,
        },
        seed: 0,
        backbone_range: case.backbone_range as f64,
        nodes,
    }
}

/// Runs the case through the real network; returns fates and the event log.
pub fn engine_fates(case: &Case) -> (Vec<Fate>, EventLog) {
    let dep = deployment_of(case);
    let spectrum = Spectrum::from_deployment(
        &dep,
        ChannelModel::plan(&case.occupancy).unwrap(),
        case.spectrum_seed,
    )
    .unwrap();
    let params = NetworkParams {
        mode: Mode::MultiHop,
        strategy: StrategyKind::Surf,
        ttl_init: 4,
        sense_dwell: case.sense_dwell,
        forward_jitter: 0,
        queue_cap: 0,
    };
    let mut net = Network::new(dep, &spectrum, params).unwrap();
    for (i, t) in case.tuned.iter().enumerate() {
        net.set_tuned(NodeId(i as u32), t.map(|c| ChannelId(c as u16)));
    }
    for (i, l) in case.listen.iter().enumerate() {
        if !l.is_empty() {
            net.set_cmr_listen(NodeId(i as u32), l.iter().map(|&c| ChannelId(c as u16)).collect());
        }
    }
    let mut log = EventLog::enabled();
    let mut rng = StepRng::new(0, 0);
    for t in case.first_slot..case.first_slot + case.slots {
        for (id, &(slot, injector, ttl)) in case.injections.iter().enumerate() {
            if slot == t {
                net.inject(
                    t,
                    Message {
                        id: MsgId(id as u32),
                        origin_pr: None,
                        injector: NodeId(injector as u32),
                        ttl,
                        hop_trace: Vec::new(),
                    },
                    &mut log,
                )
                .unwrap();
            }
        }
        net.step(t, &mut rng, &mut log).unwrap();
    }
    let fates = net
        .records()
        .iter()
        .map(|r| Fate {
            receivers: r.receivers.iter().map(|n| n.index()).collect::<BTreeSet<_>>(),
            reached_cmr_neighbor: r.flags.reached_cmr_neighbor,
            reached_cmr: r.flags.reached_cmr,
            reached_portal: r.flags.reached_portal,
            hops_to_cmr: r.hops_to_cmr,
            cmr_arrival: r.cmr_arrival,
            portal_arrival: r.portal_arrival,
            terminal: match r.terminal() {
                Terminal::ReachedPortal => "portal",
                Terminal::StuckAtCmr => "stuck",
                Terminal::DiedInNetwork => "died",
            },
        })
        .collect();
    (fates, log)
}

/// Number of mismatching cases among `cases` seeds (and the first mismatch).
/// Case `k` runs for `1 + k % max_slots` slots.
pub fn oracle_mismatches(cases: u64, max_slots: u64) -> (usize, Option<(u64, String)>) {
    let mut bad = 0;
    let mut first = None;
    for seed in 0..cases {
        let case = random_case(seed, 1 + seed % max_slots);
        let want = oracle::simulate(&case);
        let (got, _) = engine_fates(&case);
        if want != got {
            bad += 1;
            if first.is_none() {
                first = Some((seed, format!("case {case:?}\noracle {want:?}\nengine {got:?}")));
            }
        }
    }
    (bad, first)
}
