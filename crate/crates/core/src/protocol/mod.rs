//! Per-slot node behavior.
//!
//! Time is slotted and every radio sends at most one transmission per slot.
//! A slot is evaluated in two phases: all transmissions are planned from the
//! state at the start of the slot, then all receptions are applied at once.

pub mod backbone;
pub mod discovery;
pub mod log;
pub mod medium;
pub mod network;
pub mod polling;

use std::fmt;
use std::str::FromStr;

use crate::ids::{ChannelId, NodeId, Slot};

pub use backbone::{Backbone, RelayAction};
pub use discovery::{
    discover_infrastructure, pickup_pr_data, BeaconSchedule, InfrastructureRegistry,
    PickupOutcome, PrDataSources, RegistryEntry, ScanPlan,
};
pub use log::{Event, EventKind, EventLog};
pub use network::{MessageRecord, Network, NetworkParams};
pub use polling::{cmr_poll, Grant, PollCoordinator, Poller};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(pub u32);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// How CR devices reach the CMRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// CMR-assigned channels and polled uploads.
    SingleHop,
    /// TTL-bounded CR-to-CR dissemination.
    MultiHop,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SingleHop => "single_hop",
            Mode::MultiHop => "multi_hop",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single_hop" => Ok(Mode::SingleHop),
            "multi_hop" => Ok(Mode::MultiHop),
            other => Err(format!(
                "unknown mode `{other}` (expected single_hop|multi_hop)"
            )),
        }
    }
}

/// One transmission of a message copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub node: NodeId,
    pub slot: Slot,
    pub channel: ChannelId,
    /// TTL carried by this transmission.
    pub ttl: u8,
}

/// A data unit as held by one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: MsgId,
    /// Set when the payload was picked up from a PR device.
    pub origin_pr: Option<NodeId>,
    /// CR that first transmitted it.
    pub injector: NodeId,
    /// Remaining hop budget.
    pub ttl: u8,
    /// Transmissions this copy went through, oldest first.
    pub hop_trace: Vec<Hop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeliveryFlags {
    pub reached_cmr_neighbor: bool,
    pub reached_cmr: bool,
    pub reached_portal: bool,
}

/// Final state of an injected message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    ReachedPortal,
    StuckAtCmr,
    DiedInNetwork,
}

impl DeliveryFlags {
    pub fn terminal(&self) -> Terminal {
        if self.reached_portal {
            Terminal::ReachedPortal
        } else if self.reached_cmr {
            Terminal::StuckAtCmr
        } else {
            Terminal::DiedInNetwork
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Data(Message),
    Beacon,
    Poll,
    Feedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub sender: NodeId,
    pub channel: ChannelId,
    pub slot: Slot,
    pub payload: Payload,
}
