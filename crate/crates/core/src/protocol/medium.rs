//! Broadcast medium with binary interference.
//!
//! A listener tuned to channel `c` receives a transmission iff exactly one
//! neighbor transmits on `c` in that slot and no in-range PR device is active
//! on `c` at the listener. Two or more in-range same-channel transmissions
//! destroy every reception at that listener.

use std::collections::BTreeMap;

use crate::ids::{ChannelId, NodeId};
use crate::topology::NeighborTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxIntent {
    pub sender: NodeId,
    pub channel: ChannelId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// `tx` indexes the intent slice given to [`resolve`].
    Received { listener: NodeId, tx: usize },
    PrBlocked { listener: NodeId, tx: usize },
    Collision {
        listener: NodeId,
        channel: ChannelId,
        senders: Vec<NodeId>,
    },
}

/// Outcomes ordered by `(listener, channel)`.
pub fn resolve(
    txs: &[TxIntent],
    neighbors: &NeighborTable,
    mut listening: impl FnMut(NodeId, ChannelId) -> bool,
    mut pr_busy: impl FnMut(NodeId, ChannelId) -> bool,
) -> Vec<Outcome> {
    let mut heard: BTreeMap<(NodeId, ChannelId), Vec<usize>> = BTreeMap::new();
    for (k, tx) in txs.iter().enumerate() {
        for &v in neighbors.of(tx.sender) {
            if listening(v, tx.channel) {
                heard.entry((v, tx.channel)).or_default().push(k);
            }
        }
    }
    heard
        .into_iter()
        .map(|((listener, channel), senders)| match senders.as_slice() {
            [tx] => {
                if pr_busy(listener, channel) {
                    Outcome::PrBlocked { listener, tx: *tx }
                } else {
                    Outcome::Received { listener, tx: *tx }
                }
            }
            many => Outcome::Collision {
                listener,
                channel,
                senders: many.iter().map(|&k| txs[k].sender).collect(),
            },
        })
        .collect()
}
