//! Line-oriented event log.
//!
//! One record per line: `slot kind node channel msg ttl peer`, with `-` for
//! absent fields. `peer` is the sender for receptions and the relaying CMR for
//! portal arrivals.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId, Slot};
use crate::protocol::MsgId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Discover,
    Pickup,
    PickupFail,
    Inject,
    Poll,
    Tx,
    Rx,
    CmrRx,
    Dup,
    Collision,
    PrBlock,
    Relay,
    Portal,
    Stuck,
}

impl EventKind {
    pub const ALL: [EventKind; 14] = [
        EventKind::Discover,
        EventKind::Pickup,
        EventKind::PickupFail,
        EventKind::Inject,
        EventKind::Poll,
        EventKind::Tx,
        EventKind::Rx,
        EventKind::CmrRx,
        EventKind::Dup,
        EventKind::Collision,
        EventKind::PrBlock,
        EventKind::Relay,
        EventKind::Portal,
        EventKind::Stuck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Discover => "discover",
            EventKind::Pickup => "pickup",
            EventKind::PickupFail => "pickup_fail",
            EventKind::Inject => "inject",
            EventKind::Poll => "poll",
            EventKind::Tx => "tx",
            EventKind::Rx => "rx",
            EventKind::CmrRx => "cmr_rx",
            EventKind::Dup => "dup",
            EventKind::Collision => "collision",
            EventKind::PrBlock => "pr_block",
            EventKind::Relay => "relay",
            EventKind::Portal => "portal",
            EventKind::Stuck => "stuck",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub slot: Slot,
    pub kind: EventKind,
    pub node: NodeId,
    pub channel: Option<ChannelId>,
    pub msg: Option<MsgId>,
    pub ttl: Option<u8>,
    pub peer: Option<NodeId>,
}

impl Event {
    pub fn new(slot: Slot, kind: EventKind, node: NodeId) -> Self {
        Event {
            slot,
            kind,
            node,
            channel: None,
            msg: None,
            ttl: None,
            peer: None,
        }
    }

    pub fn channel(mut self, ch: ChannelId) -> Self {
        self.channel = Some(ch);
        self
    }

    pub fn msg(mut self, id: MsgId, ttl: u8) -> Self {
        self.msg = Some(id);
        self.ttl = Some(ttl);
        self
    }

    pub fn msg_only(mut self, id: MsgId) -> Self {
        self.msg = Some(id);
        self
    }

    pub fn peer(mut self, peer: NodeId) -> Self {
        self.peer = Some(peer);
        self
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        write!(
            f,
            "{} {} {} {} {} {} {}",
            self.slot,
            self.kind,
            self.node.0,
            opt(self.channel.map(|c| c.0)),
            opt(self.msg.map(|m| m.0)),
            opt(self.ttl),
            opt(self.peer.map(|p| p.0)),
        )
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(format!("expected 7 fields, found {}", f.len()));
        }
        fn num<T: FromStr>(s: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad number `{s}`"))
        }
        fn opt<T: FromStr>(s: &str) -> Result<Option<T>, String> {
            if s == "-" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        Ok(Event {
            slot: num(f[0])?,
            kind: f[1].parse()?,
            node: NodeId(num(f[2])?),
            channel: opt(f[3])?.map(ChannelId),
            msg: opt(f[4])?.map(MsgId),
            ttl: opt(f[5])?,
            peer: opt(f[6])?.map(NodeId),
        })
    }
}

/// Event sink. A disabled log drops records without allocating.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    enabled: bool,
    events: Vec<Event>,
}

impl EventLog {
    pub fn enabled() -> Self {
        EventLog {
            enabled: true,
            events: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        EventLog::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    pub fn push(&mut self, event: Event) {
        if self.enabled {
            self.events.push(event);
        }
    }

    /// Events in slot order; events of the same slot keep emission order.
    pub fn events(&mut self) -> &[Event] {
        self.events.sort_by_key(|e| e.slot);
        &self.events
    }

    pub fn into_events(mut self) -> Vec<Event> {
        self.events.sort_by_key(|e| e.slot);
        self.events
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_text(&mut self) -> String {
        let mut out = String::from("# crdrn event log v1: slot kind node channel msg ttl peer\n");
        for e in self.events() {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

/// Parses a log, returning each event with its 1-based line number.
pub fn parse_log(text: &str) -> Result<Vec<(usize, Event)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| {
            l.parse().map(|e| (i + 1, e)).map_err(|reason| Error::Parse {
                line: i + 1,
                reason,
            })
        })
        .collect()
}
