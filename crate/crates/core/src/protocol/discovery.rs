//! Infrastructure discovery and PR data pickup.
//!
//! PR devices beacon on their channel in every slot `t` with
//! `(t + id) % period == 0`. A scanning CR dwells `dwell` consecutive slots on
//! each channel in turn, so a dwell of at least one beacon period guarantees
//! that every in-range PR on the scanned channel is heard.

use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId, Slot};
use crate::protocol::{Message, MsgId};
use crate::rng::{counter_uniform, STREAM_DATA};
use crate::spectrum::Spectrum;
use crate::topology::{Node, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanPlan {
    pub channels: usize,
    pub dwell: u64,
}

impl ScanPlan {
    pub fn channel_at(&self, slot: Slot) -> ChannelId {
        ChannelId(((slot / self.dwell.max(1)) % self.channels.max(1) as u64) as u16)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconSchedule {
    pub period: u64,
}

impl BeaconSchedule {
    pub fn beacons(&self, pr: NodeId, slot: Slot) -> bool {
        (slot + pr.0 as u64).is_multiple_of(self.period.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistryEntry {
    pub pr: NodeId,
    pub channel: ChannelId,
    pub last_heard: Slot,
}

/// Non-CR devices one CR device has discovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfrastructureRegistry {
    pub owner: NodeId,
    entries: Vec<RegistryEntry>,
}

impl InfrastructureRegistry {
    pub fn new(owner: NodeId) -> Self {
        InfrastructureRegistry {
            owner,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, pr: NodeId) -> bool {
        self.entries.iter().any(|e| e.pr == pr)
    }

    fn refresh(&mut self, pr: NodeId, channel: ChannelId, slot: Slot) {
        match self.entries.iter_mut().find(|e| e.pr == pr) {
            Some(e) => {
                e.channel = channel;
                e.last_heard = slot;
            }
            None => {
                self.entries.push(RegistryEntry {
                    pr,
                    channel,
                    last_heard: slot,
                });
                self.entries.sort_by_key(|e| e.pr);
            }
        }
    }
}

/// One scanning slot of `cr`: every in-range PR beaconing on the scanned
/// channel is added or refreshed. Returns the PRs heard this slot.
pub fn discover_infrastructure(
    cr: &Node,
    slot: Slot,
    scan: &ScanPlan,
    beacons: &BeaconSchedule,
    pr_devices: &[Node],
    registry: &mut InfrastructureRegistry,
) -> Vec<NodeId> {
    let ch = scan.channel_at(slot);
    let heard: Vec<NodeId> = pr_devices
        .iter()
        .filter(|p| {
            p.role == Role::PrDevice
                && p.channel == Some(ch)
                && beacons.beacons(p.id, slot)
                && cr.hears(p)
        })
        .map(|p| p.id)
        .collect();
    for &pr in &heard {
        registry.refresh(pr, ch, slot);
    }
    heard
}

/// Pending data units held by each PR device.
#[derive(Debug, Clone, PartialEq)]
pub struct PrDataSources {
    pending: Vec<u32>,
    rate: f64,
    seed: u64,
}

impl PrDataSources {
    /// Every PR node starts with `initial` pending units; other nodes hold none.
    pub fn new(nodes: &[Node], initial: u32, rate: f64, seed: u64) -> Self {
        PrDataSources {
            pending: nodes
                .iter()
                .map(|n| if n.role == Role::PrDevice { initial } else { 0 })
                .collect(),
            rate,
            seed,
        }
    }

    pub fn pending(&self, pr: NodeId) -> u32 {
        self.pending.get(pr.index()).copied().unwrap_or(0)
    }

    /// Each PR gains a unit in `slot` with probability `rate`, drawn from a
    /// counter stream keyed by `(node, slot)`.
    pub fn generate(&mut self, nodes: &[Node], slot: Slot) {
        if self.rate <= 0.0 {
            return;
        }
        for n in nodes.iter().filter(|n| n.role == Role::PrDevice) {
            if counter_uniform(self.seed, STREAM_DATA, n.id.0 as u64, slot) < self.rate {
                self.pending[n.id.index()] += 1;
            }
        }
    }

    fn take(&mut self, pr: NodeId) -> bool {
        match self.pending.get_mut(pr.index()) {
            Some(p) if *p > 0 => {
                *p -= 1;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PickupOutcome {
    EmptyRegistry,
    NoPendingData,
    Collision { pr: NodeId, channel: ChannelId },
    Picked(Message),
}

/// `cr` tunes to the channel of a discovered PR with pending data (cycling
/// through candidates by slot) and receives one unit, unless another PR bound
/// to that channel is active within the CR's range.
#[allow(clippy::too_many_arguments)]
pub fn pickup_pr_data(
    cr: &Node,
    registry: &InfrastructureRegistry,
    slot: Slot,
    spectrum: &Spectrum,
    sources: &mut PrDataSources,
    next_id: &mut u32,
    ttl_init: u8,
) -> Result<PickupOutcome> {
    if cr.role != Role::CrDevice {
        return Err(Error::InvalidArgument(format!("{} is not a CR device", cr.id)));
    }
    if registry.is_empty() {
        return Ok(PickupOutcome::EmptyRegistry);
    }
    let candidates: Vec<&RegistryEntry> = registry
        .entries()
        .iter()
        .filter(|e| sources.pending(e.pr) > 0)
        .collect();
    if candidates.is_empty() {
        return Ok(PickupOutcome::NoPendingData);
    }
    let entry = candidates[(slot % candidates.len() as u64) as usize];
    let collided = spectrum.emitters().iter().any(|e| {
        e.channel == entry.channel
            && e.node != entry.pr
            && e.position.distance(&cr.position) <= cr.range
            && spectrum.emitter_active(e, slot)
    });
    if collided {
        return Ok(PickupOutcome::Collision {
            pr: entry.pr,
            channel: entry.channel,
        });
    }
    sources.take(entry.pr);
    let id = MsgId(*next_id);
    *next_id += 1;
    Ok(PickupOutcome::Picked(Message {
        id,
        origin_pr: Some(entry.pr),
        injector: cr.id,
        ttl: ttl_init,
        hop_trace: Vec::new(),
    }))
}
