//! CMR polling for single-hop mode.
//!
//! Each CMR keeps one round-robin cursor per assigned channel and issues at
//! most one grant per channel per slot, bounded by its radio count. A granted
//! CR with nothing queued wastes the grant.

use crate::ids::{ChannelId, NodeId, Slot};
use crate::strategy::Assignment;
use crate::topology::NeighborTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub cmr: NodeId,
    pub cr: NodeId,
    pub channel: ChannelId,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ChannelQueue {
    channel: ChannelId,
    crs: Vec<NodeId>,
    cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poller {
    pub cmr: NodeId,
    radios: usize,
    queues: Vec<ChannelQueue>,
}

impl Poller {
    pub fn new(cmr: NodeId, assignment: &Assignment, radios: usize) -> Self {
        let queues = assignment
            .eligible
            .iter()
            .map(|&channel| ChannelQueue {
                channel,
                crs: assignment.crs_on(channel),
                cursor: 0,
            })
            .filter(|q| !q.crs.is_empty())
            .collect();
        Poller {
            cmr,
            radios: radios.max(1),
            queues,
        }
    }

    /// Channels this CMR polls on.
    pub fn channels(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.queues.iter().map(|q| q.channel)
    }

    /// Grants for `slot`. Channels are visited starting at `slot % n` so that
    /// channels beyond the radio budget are still served; `allow` may veto a
    /// channel, in which case its cursor does not move.
    pub fn next_grants(
        &mut self,
        slot: Slot,
        mut allow: impl FnMut(ChannelId, NodeId) -> bool,
    ) -> Vec<Grant> {
        let n = self.queues.len();
        let mut grants = Vec::new();
        if n == 0 {
            return grants;
        }
        let start = (slot % n as u64) as usize;
        for k in 0..n {
            if grants.len() == self.radios {
                break;
            }
            let q = &mut self.queues[(start + k) % n];
            let cr = q.crs[q.cursor];
            if !allow(q.channel, cr) {
                continue;
            }
            q.cursor = (q.cursor + 1) % q.crs.len();
            grants.push(Grant {
                cmr: self.cmr,
                cr,
                channel: q.channel,
                slot,
            });
        }
        grants
    }
}

/// Unconstrained poll of a single CMR.
pub fn cmr_poll(poller: &mut Poller, slot: Slot) -> Vec<Grant> {
    poller.next_grants(slot, |_, _| true)
}

/// Backbone-coordinated polling across all CMRs. Grants are issued in CMR id
/// order; a grant on channel `c` is withheld if `c` is PR-busy at the CMR or
/// if it would put two granted CRs in range of the same polling CMR on `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PollCoordinator {
    pollers: Vec<Poller>,
}

impl PollCoordinator {
    pub fn new(mut pollers: Vec<Poller>) -> Self {
        pollers.sort_by_key(|p| p.cmr);
        PollCoordinator { pollers }
    }

    pub fn pollers(&self) -> &[Poller] {
        &self.pollers
    }

    pub fn grants(
        &mut self,
        slot: Slot,
        neighbors: &NeighborTable,
        mut pr_busy: impl FnMut(NodeId, ChannelId) -> bool,
    ) -> Vec<Grant> {
        let mut issued: Vec<Grant> = Vec::new();
        for poller in &mut self.pollers {
            let cmr = poller.cmr;
            let new = poller.next_grants(slot, |ch, cr| {
                !pr_busy(cmr, ch)
                    && !issued.iter().any(|g| {
                        g.channel == ch
                            && (neighbors.are_neighbors(g.cr, cmr)
                                || neighbors.are_neighbors(cr, g.cmr))
                    })
            });
            issued.extend(new);
        }
        issued
    }
}
