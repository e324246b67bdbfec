//! CMR backbone relaying toward the portal.
//!
//! Backbone links use dedicated radios: they are collision-free and carry one
//! hop per slot along a fewest-hop path (next hop: lowest id one hop closer).

use crate::ids::{NodeId, Slot};
use crate::topology::{Deployment, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelayAction {
    Deliver { path: Vec<NodeId>, arrival: Slot },
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Backbone {
    hops: Vec<Option<u32>>,
    next: Vec<Option<NodeId>>,
}

impl Backbone {
    pub fn build(deployment: &Deployment) -> Self {
        let hops = deployment.backbone_hops();
        let next = deployment
            .nodes
            .iter()
            .map(|n| {
                let h = hops[n.id.index()]?;
                if n.role != Role::Cmr || h == 0 {
                    return None;
                }
                deployment
                    .nodes
                    .iter()
                    .filter(|m| hops[m.id.index()] == Some(h - 1))
                    .find(|m| deployment.backbone_linked(n.id, m.id))
                    .map(|m| m.id)
            })
            .collect();
        Backbone { hops, next }
    }

    pub fn hops_to_portal(&self, cmr: NodeId) -> Option<u32> {
        self.hops.get(cmr.index()).copied().flatten()
    }

    /// Forwarding of a message that `cmr` received in `slot`.
    pub fn cmr_relay(&self, cmr: NodeId, slot: Slot) -> RelayAction {
        let Some(h) = self.hops_to_portal(cmr).filter(|&h| h > 0) else {
            return RelayAction::Stuck;
        };
        let mut path = Vec::with_capacity(h as usize);
        let mut at = cmr;
        while let Some(n) = self.next[at.index()] {
            path.push(n);
            at = n;
        }
        RelayAction::Deliver {
            path,
            arrival: slot + h as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Area, Node, Point};

    fn deployment(xs: &[(Role, f64)]) -> Deployment {
        Deployment {
            area: Area {
                width: 1e4,
                height: 1e4,
            },
            seed: 0,
            backbone_range: 100.0,
            nodes: xs
                .iter()
                .enumerate()
                .map(|(i, &(role, x))| Node {
                    id: NodeId(i as u32),
                    role,
                    position: Point::new(x, 0.0),
                    range: 100.0,
                    radio_count: 2,
                    channel: None,
                })
                .collect(),
        }
    }

    #[test]
    fn adjacent_cmr_delivers_next_slot() {
        let b = Backbone::build(&deployment(&[(Role::Portal, 0.0), (Role::Cmr, 50.0)]));
        assert_eq!(
            b.cmr_relay(NodeId(1), 10),
            RelayAction::Deliver {
                path: vec![NodeId(0)],
                arrival: 11
            }
        );
    }

    #[test]
    fn chain_of_three_takes_three_slots() {
        let b = Backbone::build(&deployment(&[
            (Role::Portal, 0.0),
            (Role::Cmr, 90.0),
            (Role::Cmr, 180.0),
            (Role::Cmr, 270.0),
        ]));
        assert_eq!(
            b.cmr_relay(NodeId(3), 0),
            RelayAction::Deliver {
                path: vec![NodeId(2), NodeId(1), NodeId(0)],
                arrival: 3
            }
        );
    }

    #[test]
    fn disconnected_cmr_is_stuck() {
        let b = Backbone::build(&deployment(&[(Role::Portal, 0.0), (Role::Cmr, 500.0)]));
        assert_eq!(b.cmr_relay(NodeId(1), 0), RelayAction::Stuck);
    }
}
