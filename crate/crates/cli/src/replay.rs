//! Offline verification of an event log against the deployment it ran on.
//!
//! Everything here is recomputed from the two files alone: neighbor
//! relations from node positions and ranges, message custody from `inject`
//! and `rx` events. PR activity is not in the log, so `pr_block` events are
//! checked for geometry only. Logs of mobile runs will trip the range checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crdrn_core::protocol::log::{Event, EventKind};
use crdrn_core::protocol::MsgId;
use crdrn_core::topology::NeighborTable;
use crdrn_core::{ChannelId, Deployment, NodeId, Role, Slot};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub events: usize,
    pub injected: usize,
    pub transmissions: usize,
    pub collisions: usize,
    pub reached_cmr_neighbor: usize,
    pub reached_cmr: usize,
    pub reached_portal: usize,
    pub violations: Vec<Violation>,
}

impl ReplayReport {
    fn ratio(&self, n: usize) -> Option<f64> {
        (self.injected > 0).then(|| n as f64 / self.injected as f64)
    }

    pub fn delivery_ratio_cmr_neighbor(&self) -> Option<f64> {
        self.ratio(self.reached_cmr_neighbor)
    }

    pub fn delivery_ratio_cmr(&self) -> Option<f64> {
        self.ratio(self.reached_cmr)
    }

    pub fn delivery_ratio_portal(&self) -> Option<f64> {
        self.ratio(self.reached_portal)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        let fmt_ratio = |r: Option<f64>| r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "events {}", self.events);
        let _ = writeln!(out, "injected {}", self.injected);
        let _ = writeln!(out, "transmissions {}", self.transmissions);
        let _ = writeln!(out, "collisions {}", self.collisions);
        let _ = writeln!(
            out,
            "delivery_ratio_cmr_neighbor {}",
            fmt_ratio(self.delivery_ratio_cmr_neighbor())
        );
        let _ = writeln!(out, "delivery_ratio_cmr {}", fmt_ratio(self.delivery_ratio_cmr()));
        let _ = writeln!(out, "delivery_ratio_portal {}", fmt_ratio(self.delivery_ratio_portal()));
        let _ = writeln!(out, "violations {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(out, "  {v}");
        }
        out
    }
}

struct Tx {
    node: NodeId,
    channel: Option<ChannelId>,
    ttl: Option<u8>,
}

#[derive(Default)]
struct MsgState {
    /// ttl of each node's copy; only copies that may still be forwarded.
    held: BTreeMap<NodeId, u8>,
    sent: BTreeSet<NodeId>,
    seen: BTreeSet<NodeId>,
    cmr_neighbor: bool,
    cmr: bool,
    portal: bool,
}

/// Checks `events` (with their line numbers, in file order) against
/// `deployment`.
pub fn replay(deployment: &Deployment, events: &[(usize, Event)]) -> ReplayReport {
    let table = NeighborTable::build(deployment);
    let near_cmr: Vec<bool> = deployment
        .nodes
        .iter()
        .map(|n| {
            table
                .of(n.id)
                .iter()
                .any(|m| deployment.nodes[m.index()].role == Role::Cmr)
        })
        .collect();
    let role = |id: NodeId| deployment.nodes.get(id.index()).map(|n| n.role);

    let mut report = ReplayReport {
        events: events.len(),
        ..ReplayReport::default()
    };
    let mut msgs: BTreeMap<MsgId, MsgState> = BTreeMap::new();
    let violate = |report: &mut ReplayReport, line: usize, reason: String| {
        report.violations.push(Violation { line, reason });
    };

    let mut start = 0;
    let mut last_slot: Option<Slot> = None;
    while start < events.len() {
        let slot = events[start].1.slot;
        let mut end = start;
        while end < events.len() && events[end].1.slot == slot {
            end += 1;
        }
        if last_slot.is_some_and(|s| s > slot) {
            violate(&mut report, events[start].0, format!("slot {slot} out of order"));
        }
        last_slot = Some(slot);
        let group = &events[start..end];
        start = end;

        let mut txs: Vec<Tx> = Vec::new();
        for (line, e) in group {
            let line = *line;
            if role(e.node).is_none() {
                violate(&mut report, line, format!("unknown node {}", e.node));
                continue;
            }
            match e.kind {
                EventKind::Inject => {
                    let (Some(id), Some(ttl)) = (e.msg, e.ttl) else {
                        violate(&mut report, line, "inject without message and ttl".into());
                        continue;
                    };
                    if role(e.node) != Some(Role::CrDevice) {
                        violate(&mut report, line, format!("{} injects but is not a CR", e.node));
                    }
                    if ttl == 0 {
                        violate(&mut report, line, "injected with ttl 0".into());
                    }
                    if msgs.contains_key(&id) {
                        violate(&mut report, line, format!("{id} injected twice"));
                        continue;
                    }
                    report.injected += 1;
                    let st = msgs.entry(id).or_default();
                    st.held.insert(e.node, ttl);
                    st.seen.insert(e.node);
                    st.cmr_neighbor = near_cmr[e.node.index()];
                }
                EventKind::Tx => {
                    report.transmissions += 1;
                    if role(e.node) != Some(Role::CrDevice) {
                        violate(&mut report, line, format!("{} transmits but is not a CR", e.node));
                    }
                    if txs.iter().any(|t| t.node == e.node) {
                        violate(&mut report, line, format!("{} transmits twice in one slot", e.node));
                    }
                    if let (Some(id), Some(ttl)) = (e.msg, e.ttl) {
                        match msgs.get_mut(&id).map(|st| (st.held.get(&e.node).copied(), st)) {
                            Some((Some(held), st)) => {
                                if ttl > held {
                                    violate(
                                        &mut report,
                                        line,
                                        format!("ttl of {id} at {} increased from {held} to {ttl}", e.node),
                                    );
                                } else if ttl < held {
                                    violate(
                                        &mut report,
                                        line,
                                        format!("ttl of {id} at {} changed from {held} to {ttl}", e.node),
                                    );
                                }
                                if !st.sent.insert(e.node) {
                                    violate(&mut report, line, format!("{} forwards {id} twice", e.node));
                                }
                            }
                            _ => violate(
                                &mut report,
                                line,
                                format!("{} transmits {id} without a forwardable copy", e.node),
                            ),
                        }
                        if ttl == 0 {
                            violate(&mut report, line, format!("{id} transmitted with ttl 0"));
                        }
                    } else {
                        violate(&mut report, line, "tx without message and ttl".into());
                    }
                    txs.push(Tx {
                        node: e.node,
                        channel: e.channel,
                        ttl: e.ttl,
                    });
                }
                _ => {}
            }
        }

        let in_range = |listener: NodeId, channel: Option<ChannelId>| -> Vec<&Tx> {
            txs.iter()
                .filter(|t| {
                    t.channel == channel && t.node != listener && table.are_neighbors(t.node, listener)
                })
                .collect()
        };

        for (line, e) in group {
            let line = *line;
            let Some(node_role) = role(e.node) else {
                continue;
            };
            match e.kind {
                EventKind::Rx | EventKind::CmrRx | EventKind::Dup | EventKind::PrBlock => {
                    let senders = in_range(e.node, e.channel);
                    let Some(peer) = e.peer else {
                        violate(&mut report, line, format!("{} event without sender", e.kind));
                        continue;
                    };
                    let Some(tx) = senders.iter().find(|t| t.node == peer) else {
                        violate(
                            &mut report,
                            line,
                            format!("{} hears {peer}, which is not transmitting in range on that channel", e.node),
                        );
                        continue;
                    };
                    if senders.len() != 1 {
                        violate(
                            &mut report,
                            line,
                            format!("{} with {} in-range transmitters on one channel", e.kind, senders.len()),
                        );
                    }
                    if e.kind != EventKind::PrBlock && txs.iter().any(|t| t.node == e.node) {
                        violate(&mut report, line, format!("{} receives while transmitting", e.node));
                    }
                    if e.kind == EventKind::PrBlock {
                        continue;
                    }
                    let (Some(id), Some(ttl)) = (e.msg, e.ttl) else {
                        violate(&mut report, line, format!("{} without message and ttl", e.kind));
                        continue;
                    };
                    let expected = tx.ttl.and_then(|t| t.checked_sub(1));
                    if expected.is_some_and(|x| ttl > x) {
                        violate(
                            &mut report,
                            line,
                            format!("ttl of {id} increased across hop {peer} -> {}", e.node),
                        );
                    } else if expected != Some(ttl) {
                        violate(&mut report, line, format!("ttl of {id} not decremented by one"));
                    }
                    let Some(st) = msgs.get_mut(&id) else {
                        violate(&mut report, line, format!("{id} was never injected"));
                        continue;
                    };
                    let fresh = st.seen.insert(e.node);
                    match e.kind {
                        EventKind::Dup => {
                            if fresh {
                                violate(&mut report, line, format!("dup of {id} at {} never seen before", e.node));
                            }
                        }
                        _ if !fresh => {
                            violate(&mut report, line, format!("{id} accepted twice by {}", e.node));
                        }
                        EventKind::CmrRx => {
                            if node_role != Role::Cmr {
                                violate(&mut report, line, format!("cmr_rx at non-CMR {}", e.node));
                            }
                            st.cmr = true;
                            st.cmr_neighbor = true;
                        }
                        _ => {
                            if node_role != Role::CrDevice {
                                violate(&mut report, line, format!("rx at non-CR {}", e.node));
                            }
                            if near_cmr[e.node.index()] {
                                st.cmr_neighbor = true;
                            }
                            if ttl >= 1 {
                                st.held.insert(e.node, ttl);
                            }
                        }
                    }
                }
                EventKind::Collision => {
                    report.collisions += 1;
                    let n = in_range(e.node, e.channel).len();
                    if n < 2 {
                        violate(&mut report, line, format!("collision with {n} in-range transmitters"));
                    }
                }
                EventKind::Relay | EventKind::Portal | EventKind::Stuck => {
                    let Some(id) = e.msg else {
                        violate(&mut report, line, format!("{} without message", e.kind));
                        continue;
                    };
                    match msgs.get_mut(&id) {
                        Some(st) if st.cmr => {
                            if e.kind == EventKind::Portal {
                                if node_role != Role::Portal {
                                    violate(&mut report, line, format!("portal event at {}", e.node));
                                }
                                st.portal = true;
                            }
                        }
                        _ => violate(
                            &mut report,
                            line,
                            format!("{} of {id} before any CMR received it", e.kind),
                        ),
                    }
                }
                EventKind::Poll if node_role != Role::Cmr => {
                    violate(&mut report, line, format!("poll from non-CMR {}", e.node));
                }
                _ => {}
            }
        }
    }

    for st in msgs.values() {
        report.reached_cmr_neighbor += st.cmr_neighbor as usize;
        report.reached_cmr += st.cmr as usize;
        report.reached_portal += st.portal as usize;
    }
    report
}
