//! Brute-force slotted simulator used as a reference for the network.
//!
//! Written from the model definition only: integer geometry, its own PR
//! activity hash, integer SURF weights, linear scans everywhere.

use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Cr,
    Cmr,
    Pr,
    Portal,
}

#[derive(Debug, Clone)]
pub struct ONode {
    pub kind: Kind,
    pub x: i64,
    pub y: i64,
    pub range: i64,
    /// PR bound channel.
    pub channel: usize,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub nodes: Vec<ONode>,
    pub occupancy: Vec<f64>,
    pub spectrum_seed: u64,
    pub backbone_range: i64,
    pub sense_dwell: u64,
    /// Initial CR residencies.
    pub tuned: Vec<Option<usize>>,
    /// CMR listen channels.
    pub listen: Vec<Vec<usize>>,
    /// (slot, injector, ttl), one message each, ids in order.
    pub injections: Vec<(u64, usize, u8)>,
    pub first_slot: u64,
    pub slots: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fate {
    pub receivers: BTreeSet<usize>,
    pub reached_cmr_neighbor: bool,
    pub reached_cmr: bool,
    pub reached_portal: bool,
    pub hops_to_cmr: Option<u32>,
    pub cmr_arrival: Option<u64>,
    pub portal_arrival: Option<u64>,
    /// "portal", "stuck" or "died".
    pub terminal: &'static str,
}

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ACTIVITY: u64 = 0x5052_4143_5449_5645;

fn pr_on(case: &Case, pr: usize, slot: u64) -> bool {
    let h = mix(mix(mix(case.spectrum_seed ^ ACTIVITY) ^ pr as u64) ^ slot);
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    u < case.occupancy[case.nodes[pr].channel]
}

fn d2(a: &ONode, b: &ONode) -> i64 {
    (a.x - b.x).pow(2) + (a.y - b.y).pow(2)
}

fn adjacent(case: &Case, a: usize, b: usize) -> bool {
    let (na, nb) = (&case.nodes[a], &case.nodes[b]);
    a != b && d2(na, nb) <= na.range.min(nb.range).pow(2)
}

/// Busy at `node` on `ch`: some PR on `ch` within the node's own range is on.
fn busy(case: &Case, node: usize, ch: usize, slot: u64) -> bool {
    let n = &case.nodes[node];
    (0..case.nodes.len()).any(|p| {
        let pr = &case.nodes[p];
        pr.kind == Kind::Pr && pr.channel == ch && d2(pr, n) <= n.range.pow(2) && pr_on(case, p, slot)
    })
}

fn surf(case: &Case, cr: usize, slot: u64, tuned: &[Option<usize>]) -> usize {
    let c = case.occupancy.len();
    let lo = (slot + 1).saturating_sub(case.sense_dwell);
    let len = (slot + 1 - lo) as i64;
    let busy_count: Vec<i64> = (0..c)
        .map(|ch| (lo..=slot).filter(|&t| busy(case, cr, ch, t)).count() as i64)
        .collect();
    let recv: Vec<i64> = (0..c)
        .map(|ch| {
            (0..case.nodes.len())
                .filter(|&m| case.nodes[m].kind == Kind::Cr && adjacent(case, cr, m) && tuned[m] == Some(ch))
                .count() as i64
        })
        .collect();
    // weight * len, exact in integers
    let w: Vec<i64> = (0..c).map(|ch| (len - busy_count[ch]) * recv[ch]).collect();
    let top = *w.iter().max().unwrap();
    if top > 0 {
        return w.iter().position(|&x| x == top).unwrap();
    }
    let least = *busy_count.iter().min().unwrap();
    busy_count.iter().position(|&b| b == least).unwrap()
}

fn backbone_hops(case: &Case) -> Vec<Option<u32>> {
    let n = case.nodes.len();
    let bb = |k: usize| matches!(case.nodes[k].kind, Kind::Cmr | Kind::Portal);
    let mut hops: Vec<Option<u32>> = (0..n)
        .map(|k| (case.nodes[k].kind == Kind::Portal).then_some(0))
        .collect();
    // Bellman-Ford style relaxation; n is tiny.
    for _ in 0..n {
        for a in 0..n {
            for b in 0..n {
                if a == b || !bb(a) || !bb(b) || case.nodes[a].kind == Kind::Portal {
                    continue;
                }
                if d2(&case.nodes[a], &case.nodes[b]) > case.backbone_range.pow(2) {
                    continue;
                }
                if let Some(hb) = hops[b] {
                    if hops[a].map_or(true, |ha| hb + 1 < ha) {
                        hops[a] = Some(hb + 1);
                    }
                }
            }
        }
    }
    hops
}

struct Copy {
    msg: usize,
    ttl: u8,
    hops: u32,
    ready: u64,
}

pub fn simulate(case: &Case) -> Vec<Fate> {
    let n = case.nodes.len();
    let near_cmr: Vec<bool> = (0..n)
        .map(|k| (0..n).any(|m| case.nodes[m].kind == Kind::Cmr && adjacent(case, k, m)))
        .collect();
    let to_portal = backbone_hops(case);
    let mut tuned = case.tuned.clone();
    let mut queues: Vec<Vec<Copy>> = (0..n).map(|_| Vec::new()).collect();
    let mut seen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut fates: Vec<Fate> = Vec::new();

    for t in case.first_slot..case.first_slot + case.slots {
        for (id, &(slot, injector, ttl)) in case.injections.iter().enumerate() {
            if slot == t {
                seen[injector].insert(id);
                queues[injector].push(Copy {
                    msg: id,
                    ttl,
                    hops: 0,
                    ready: t,
                });
                fates.push(Fate {
                    receivers: BTreeSet::new(),
                    reached_cmr_neighbor: near_cmr[injector],
                    reached_cmr: false,
                    reached_portal: false,
                    hops_to_cmr: None,
                    cmr_arrival: None,
                    portal_arrival: None,
                    terminal: "died",
                });
            }
        }

        // (sender, channel, msg, ttl, hops)
        let mut sends: Vec<(usize, usize, usize, u8, u32)> = Vec::new();
        for cr in 0..n {
            if case.nodes[cr].kind != Kind::Cr {
                continue;
            }
            let Some(k) = queues[cr].iter().position(|c| c.ready <= t) else {
                continue;
            };
            let copy = queues[cr].remove(k);
            let ch = surf(case, cr, t, &tuned);
            sends.push((cr, ch, copy.msg, copy.ttl, copy.hops + 1));
        }

        for v in 0..n {
            let channels: Vec<usize> = match case.nodes[v].kind {
                Kind::Cr => {
                    if sends.iter().any(|s| s.0 == v) {
                        continue;
                    }
                    tuned[v].into_iter().collect()
                }
                Kind::Cmr => case.listen[v].clone(),
                _ => continue,
            };
            for ch in channels {
                let heard: Vec<&(usize, usize, usize, u8, u32)> =
                    sends.iter().filter(|s| s.1 == ch && adjacent(case, s.0, v)).collect();
                if heard.len() != 1 || busy(case, v, ch, t) {
                    continue;
                }
                let &(_, _, msg, ttl, hops) = heard[0];
                if !seen[v].insert(msg) {
                    continue;
                }
                let f = &mut fates[msg];
                f.receivers.insert(v);
                if case.nodes[v].kind == Kind::Cmr {
                    f.reached_cmr = true;
                    f.reached_cmr_neighbor = true;
                    f.hops_to_cmr = Some(f.hops_to_cmr.map_or(hops, |h| h.min(hops)));
                    f.cmr_arrival = Some(f.cmr_arrival.map_or(t, |s| s.min(t)));
                    if let Some(h) = to_portal[v] {
                        f.reached_portal = true;
                        let at = t + h as u64;
                        f.portal_arrival = Some(f.portal_arrival.map_or(at, |s| s.min(at)));
                    }
                } else {
                    if near_cmr[v] {
                        f.reached_cmr_neighbor = true;
                    }
                    if ttl - 1 >= 1 {
                        queues[v].push(Copy {
                            msg,
                            ttl: ttl - 1,
                            hops,
                            ready: t + 1,
                        });
                    }
                }
            }
        }

        for s in &sends {
            tuned[s.0] = Some(s.1);
        }
    }

    for f in &mut fates {
        f.terminal = if f.reached_portal {
            "portal"
        } else if f.reached_cmr {
            "stuck"
        } else {
            "died"
        };
    }
    fates
}
