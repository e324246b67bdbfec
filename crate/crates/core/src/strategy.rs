//! Channel selection and the CMR spectrum opportunity map.
//!
//! The SURF-like selector weighs each channel by
//! `weight = (1 - utilization) * receivers`, where `receivers` counts the CR
//! neighbors tuned to the channel. This product is a reconstruction that
//! honors both PR availability and receiver presence; it sits behind
//! [`ChannelSelector`] so another weighting can be swapped in.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId, Slot};
use crate::spectrum::SpectrumObservation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWeight {
    pub channel: ChannelId,
    /// `1 - utilization`.
    pub availability: f64,
    pub receivers: u32,
    pub weight: f64,
}

pub fn channel_weights(utilization: &[f64], receivers: &[u32]) -> Vec<ChannelWeight> {
    utilization
        .iter()
        .zip(receivers)
        .enumerate()
        .map(|(i, (&u, &r))| {
            let availability = 1.0 - u;
            ChannelWeight {
                channel: ChannelId(i as u16),
                availability,
                receivers: r,
                weight: availability * r as f64,
            }
        })
        .collect()
}

/// Weights within this relative distance of each other are ties. Utilizations
/// are ratios of small slot counts, so distinct weights sit much further apart
/// and only rounding noise (`1 - 1/3` and friends) is absorbed.
pub const WEIGHT_TIE_TOLERANCE: f64 = 1e-9;

fn heavier(a: f64, b: f64) -> bool {
    a - b > WEIGHT_TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Picks the channel with the largest `(1 - utilization) * receivers`.
///
/// If every weight is zero the freest channel wins. Ties (see
/// [`WEIGHT_TIE_TOLERANCE`]) go to the lowest channel id, so scaling every
/// receiver count by the same positive factor never changes the result.
pub fn select_channel_surf(utilization: &[f64], receivers: &[u32]) -> Result<ChannelId> {
    if utilization.is_empty() {
        return Err(Error::InvalidArgument("empty channel set".into()));
    }
    if utilization.len() != receivers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} utilization values for {} receiver counts",
            utilization.len(),
            receivers.len()
        )));
    }

    let weight = |i: usize| (1.0 - utilization[i]) * receivers[i] as f64;
    let mut best = 0;
    let mut best_w = weight(0);
    for i in 1..utilization.len() {
        let w = weight(i);
        if heavier(w, best_w) {
            best = i;
            best_w = w;
        }
    }
    if best_w > 0.0 {
        return Ok(ChannelId(best as u16));
    }

    let mut freest = 0;
    for i in 1..utilization.len() {
        if utilization[i] < utilization[freest] {
            freest = i;
        }
    }
    Ok(ChannelId(freest as u16))
}

/// Uniform choice among `channels`, ignoring PR and CR activity.
pub fn select_channel_random<R: Rng + ?Sized>(channels: usize, rng: &mut R) -> Result<ChannelId> {
    if channels == 0 {
        return Err(Error::InvalidArgument("empty channel set".into()));
    }
    Ok(ChannelId(rng.gen_range(0..channels) as u16))
}

/// What a CR device knows when it chooses a channel.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    /// Sensed utilization per channel.
    pub utilization: &'a [f64],
    /// CR neighbors tuned to each channel during the previous slot.
    pub receivers: &'a [u32],
}

pub trait ChannelSelector: Send + Sync {
    fn name(&self) -> &'static str;

    fn select(&self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<ChannelId>;

    /// Whether [`select`](Self::select) reads `ctx` at all. Callers may skip
    /// sensing for selectors that do not.
    fn uses_context(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Surf;

impl ChannelSelector for Surf {
    fn name(&self) -> &'static str {
        "surf"
    }

    fn select(&self, ctx: &SelectionContext<'_>, _rng: &mut dyn RngCore) -> Result<ChannelId> {
        select_channel_surf(ctx.utilization, ctx.receivers)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomChannel;

impl ChannelSelector for RandomChannel {
    fn name(&self) -> &'static str {
        "rd"
    }

    fn select(&self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<ChannelId> {
        select_channel_random(ctx.utilization.len(), rng)
    }

    fn uses_context(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    Surf,
    Random,
}

impl StrategyKind {
    pub fn selector(self) -> &'static dyn ChannelSelector {
        match self {
            StrategyKind::Surf => &Surf,
            StrategyKind::Random => &RandomChannel,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.selector().name()
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "surf" => Ok(StrategyKind::Surf),
            "rd" => Ok(StrategyKind::Random),
            other => Err(format!("unknown strategy `{other}` (expected surf|rd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapMode {
    /// Only the owning CMR's own sensing.
    Standalone,
    /// Own sensing plus CR-device feedback.
    Coordinated,
}

impl MapMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MapMode::Standalone => "standalone",
            MapMode::Coordinated => "coordinated",
        }
    }
}

impl fmt::Display for MapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standalone" => Ok(MapMode::Standalone),
            "coordinated" => Ok(MapMode::Coordinated),
            other => Err(format!(
                "unknown map mode `{other}` (expected standalone|coordinated)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelRecord {
    pub busy_slots: u64,
    /// Observed slots, summed over all ingested observations.
    pub sample_count: u64,
    pub last_updated: Option<Slot>,
}

impl ChannelRecord {
    /// Total busy time over total observed time; 0 when nothing was observed.
    pub fn occupancy_estimate(&self) -> f64 {
        if self.sample_count == 0 {
            0.0
        } else {
            self.busy_slots as f64 / self.sample_count as f64
        }
    }

    pub fn is_known(&self) -> bool {
        self.sample_count > 0
    }
}

/// Per-channel occupancy estimates kept by one CMR.
///
/// State is a sum of integer counters plus a max over window ends, so the map
/// depends only on the multiset of ingested observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpportunityMap {
    pub owner: NodeId,
    pub mode: MapMode,
    records: Vec<ChannelRecord>,
}

impl OpportunityMap {
    pub fn new(owner: NodeId, mode: MapMode, channels: usize) -> Self {
        OpportunityMap {
            owner,
            mode,
            records: vec![ChannelRecord::default(); channels],
        }
    }

    pub fn records(&self) -> &[ChannelRecord] {
        &self.records
    }

    pub fn record(&self, channel: ChannelId) -> Option<&ChannelRecord> {
        self.records.get(channel.index())
    }

    pub fn estimate(&self, channel: ChannelId) -> f64 {
        self.record(channel).map_or(0.0, ChannelRecord::occupancy_estimate)
    }

    /// Spectrum Fluctuation Monitor ingestion. All observations are checked
    /// before any is applied.
    pub fn ingest(&mut self, observations: &[SpectrumObservation]) -> Result<()> {
        for o in observations {
            if o.channel.index() >= self.records.len() {
                return Err(Error::UnknownChannel(o.channel));
            }
            if o.window.is_empty() || o.busy_slots > o.observed_slots() {
                return Err(Error::InvalidArgument(format!(
                    "observation window {:?} with {} busy slots",
                    o.window, o.busy_slots
                )));
            }
            if self.mode == MapMode::Standalone && o.observer != self.owner {
                return Err(Error::ModeViolation {
                    owner: self.owner,
                    observer: o.observer,
                });
            }
        }
        for o in observations {
            let r = &mut self.records[o.channel.index()];
            r.busy_slots += o.busy_slots;
            r.sample_count += o.observed_slots();
            let last = o.window.end - 1;
            r.last_updated = Some(r.last_updated.map_or(last, |p| p.max(last)));
        }
        Ok(())
    }

    /// Channels sorted by ascending estimate, ties by id.
    pub fn ranked_channels(&self) -> Vec<ChannelId> {
        let mut ids: Vec<ChannelId> = ChannelId::all(self.records.len()).collect();
        ids.sort_by(|a, b| {
            self.estimate(*a)
                .total_cmp(&self.estimate(*b))
                .then(a.cmp(b))
        });
        ids
    }
}

/// Functional form of [`OpportunityMap::ingest`].
pub fn fluctuation_monitor_update(
    map: &OpportunityMap,
    observations: &[SpectrumObservation],
) -> Result<OpportunityMap> {
    let mut next = map.clone();
    next.ingest(observations)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// `(cr, channel)` in the order the CRs were given.
    pub per_cr: Vec<(NodeId, ChannelId)>,
    /// Eligible channels, freest first.
    pub eligible: Vec<ChannelId>,
}

impl Assignment {
    pub fn channel_of(&self, cr: NodeId) -> Option<ChannelId> {
        self.per_cr.iter().find(|(c, _)| *c == cr).map(|&(_, ch)| ch)
    }

    /// Number of CRs on each eligible channel, in `eligible` order.
    pub fn loads(&self) -> Vec<usize> {
        self.eligible
            .iter()
            .map(|ch| self.per_cr.iter().filter(|(_, c)| c == ch).count())
            .collect()
    }

    pub fn crs_on(&self, channel: ChannelId) -> Vec<NodeId> {
        self.per_cr
            .iter()
            .filter(|(_, c)| *c == channel)
            .map(|&(cr, _)| cr)
            .collect()
    }
}

/// Round-robin over channels whose estimate is below `busy_threshold`, freest
/// first, which keeps per-channel loads within one of each other.
pub fn cmr_assign_channels(
    map: &OpportunityMap,
    cr_ids: &[NodeId],
    busy_threshold: f64,
) -> Result<Assignment> {
    let eligible: Vec<ChannelId> = map
        .ranked_channels()
        .into_iter()
        .filter(|&ch| map.estimate(ch) < busy_threshold)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoAssignment {
            threshold: busy_threshold,
        });
    }
    let per_cr = cr_ids
        .iter()
        .enumerate()
        .map(|(i, &cr)| (cr, eligible[i % eligible.len()]))
        .collect();
    Ok(Assignment { per_cr, eligible })
}
