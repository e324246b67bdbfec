//! Slot-by-slot state of one run after the warm-up phases.
//!
//! Multi-hop rules, per slot `t`:
//!
//! 1. Every CR takes the oldest queued message that is ready (`ready <= t`)
//!    and transmits it on the channel its strategy selects. Strategies see
//!    utilization sensed over the `sense_dwell` slots ending at `t` and the
//!    count of CR neighbors per channel as tuned at the end of `t - 1`.
//! 2. Listeners are CRs not transmitting in `t` (on their tuned channel) and
//!    CMRs (on each of their listen channels). Receptions follow
//!    [`medium::resolve`](super::medium::resolve).
//! 3. A CR receiving a fresh message stores it with `ttl - 1` and, if that is
//!    still at least 1, queues it ready at `t + 1 + jitter`. A CMR receiving a
//!    fresh message relays it over the backbone.
//! 4. Transmitters stay tuned to the channel they used.
//!
//! Single-hop mode replaces step 1 with coordinated CMR polling: only granted
//! CRs transmit, on their assigned channel, and only the polling CMRs listen.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::ids::{ChannelId, NodeId, Slot};
use crate::protocol::backbone::{Backbone, RelayAction};
use crate::protocol::log::{Event, EventKind, EventLog};
use crate::protocol::medium::{self, Outcome, TxIntent};
use crate::protocol::polling::PollCoordinator;
use crate::protocol::{DeliveryFlags, Hop, Message, Mode, MsgId, Terminal};
use crate::spectrum::{LocalView, Spectrum};
use crate::strategy::{SelectionContext, StrategyKind};
use crate::topology::{Deployment, NeighborTable, Point, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkParams {
    pub mode: Mode,
    pub strategy: StrategyKind,
    pub ttl_init: u8,
    pub sense_dwell: u64,
    /// Extra forwarding delay drawn uniformly from `0..=forward_jitter`.
    pub forward_jitter: u64,
    /// Per-node queue bound; 0 means unbounded.
    pub queue_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub id: MsgId,
    pub injector: NodeId,
    pub origin_pr: Option<NodeId>,
    pub injected_at: Slot,
    pub flags: DeliveryFlags,
    /// Nodes other than the injector that received the message.
    pub receivers: BTreeSet<NodeId>,
    /// Hops of the first path that reached a CMR.
    pub hops_to_cmr: Option<u32>,
    pub cmr_arrival: Option<Slot>,
    pub portal_arrival: Option<Slot>,
}

impl MessageRecord {
    pub fn terminal(&self) -> Terminal {
        self.flags.terminal()
    }
}

#[derive(Debug, Clone)]
struct Queued {
    msg: Message,
    ready: Slot,
}

#[derive(Debug, Clone, Default)]
struct NodeState {
    tuned: Option<ChannelId>,
    queue: VecDeque<Queued>,
    seen: BTreeSet<MsgId>,
}

pub struct Network<'s> {
    deployment: Deployment,
    spectrum: &'s Spectrum,
    neighbors: NeighborTable,
    views: Vec<LocalView>,
    cmr_neighbor: Vec<bool>,
    backbone: Backbone,
    params: NetworkParams,
    state: Vec<NodeState>,
    cmr_listen: Vec<Vec<ChannelId>>,
    coordinator: Option<PollCoordinator>,
    records: Vec<MessageRecord>,
    index: BTreeMap<MsgId, usize>,
    cr_ids: Vec<NodeId>,
    collisions: u64,
    transmissions: u64,
}

impl<'s> Network<'s> {
    pub fn new(deployment: Deployment, spectrum: &'s Spectrum, params: NetworkParams) -> Result<Self> {
        if params.ttl_init == 0 {
            return Err(Error::InvalidArgument("ttl_init must be at least 1".into()));
        }
        if params.sense_dwell == 0 {
            return Err(Error::InvalidArgument("sense_dwell must be at least 1".into()));
        }
        let n = deployment.len();
        let cr_ids = deployment.ids_with_role(Role::CrDevice).collect();
        let backbone = Backbone::build(&deployment);
        let mut net = Network {
            neighbors: NeighborTable::build(&deployment),
            views: Vec::new(),
            cmr_neighbor: Vec::new(),
            backbone,
            params,
            state: vec![NodeState::default(); n],
            cmr_listen: vec![Vec::new(); n],
            coordinator: None,
            records: Vec::new(),
            index: BTreeMap::new(),
            cr_ids,
            collisions: 0,
            transmissions: 0,
            spectrum,
            deployment,
        };
        net.refresh_geometry();
        Ok(net)
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn neighbors(&self) -> &NeighborTable {
        &self.neighbors
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn tuned(&self, node: NodeId) -> Option<ChannelId> {
        self.state[node.index()].tuned
    }

    pub fn set_tuned(&mut self, node: NodeId, channel: Option<ChannelId>) {
        self.state[node.index()].tuned = channel;
    }

    pub fn set_cmr_listen(&mut self, cmr: NodeId, channels: Vec<ChannelId>) {
        self.cmr_listen[cmr.index()] = channels;
    }

    pub fn cmr_listen(&self, cmr: NodeId) -> &[ChannelId] {
        &self.cmr_listen[cmr.index()]
    }

    pub fn set_poll_coordinator(&mut self, coordinator: PollCoordinator) {
        self.coordinator = Some(coordinator);
    }

    /// Whether `node` is a geometric one-hop neighbor of some CMR.
    pub fn is_cmr_neighbor(&self, node: NodeId) -> bool {
        self.cmr_neighbor[node.index()]
    }

    /// Moves a node; call [`refresh_geometry`](Self::refresh_geometry) after a batch of moves.
    pub fn set_position(&mut self, node: NodeId, position: Point) {
        self.deployment.nodes[node.index()].position = position;
    }

    pub fn refresh_geometry(&mut self) {
        self.neighbors = NeighborTable::build(&self.deployment);
        self.views = self
            .deployment
            .nodes
            .iter()
            .map(|n| self.spectrum.local_view(n.position, n.range))
            .collect();
        self.cmr_neighbor = self
            .deployment
            .nodes
            .iter()
            .map(|n| {
                self.neighbors
                    .of(n.id)
                    .iter()
                    .any(|m| self.deployment.nodes[m.index()].role == Role::Cmr)
            })
            .collect();
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn transmissions(&self) -> u64 {
        self.transmissions
    }

    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<MessageRecord> {
        self.records
    }

    pub fn record(&self, id: MsgId) -> Option<&MessageRecord> {
        self.index.get(&id).map(|&k| &self.records[k])
    }

    /// Whether any node still holds a message it will transmit.
    pub fn has_pending(&self) -> bool {
        self.state.iter().any(|s| !s.queue.is_empty())
    }

    /// Per-channel utilization sensed by `node` over the dwell window ending at `slot`.
    pub fn utilization_at(&self, node: NodeId, slot: Slot) -> Vec<f64> {
        let start = (slot + 1).saturating_sub(self.params.sense_dwell);
        self.views[node.index()].utilization(self.spectrum, start, slot + 1 - start)
    }

    /// CR neighbors of `node` per channel under the given residencies.
    pub fn receivers_by_channel(&self, node: NodeId, tuned: &[Option<ChannelId>]) -> Vec<u32> {
        let mut counts = vec![0u32; self.spectrum.channel_count()];
        for &m in self.neighbors.of(node) {
            if self.deployment.nodes[m.index()].role != Role::CrDevice {
                continue;
            }
            if let Some(ch) = tuned[m.index()] {
                counts[ch.index()] += 1;
            }
        }
        counts
    }

    fn snapshot(&self) -> Vec<Option<ChannelId>> {
        self.state.iter().map(|s| s.tuned).collect()
    }

    fn choose_channel(
        &self,
        node: NodeId,
        slot: Slot,
        snapshot: &[Option<ChannelId>],
        rng: &mut dyn RngCore,
    ) -> Result<ChannelId> {
        let selector = self.params.strategy.selector();
        let c = self.spectrum.channel_count();
        let (utilization, receivers) = if selector.uses_context() {
            (
                self.utilization_at(node, slot),
                self.receivers_by_channel(node, snapshot),
            )
        } else {
            (vec![0.0; c], vec![0; c])
        };
        selector.select(
            &SelectionContext {
                utilization: &utilization,
                receivers: &receivers,
            },
            rng,
        )
    }

    /// One channel-selection round: every CR re-selects its residency from the
    /// residencies of the previous round.
    pub fn select_residencies(&mut self, slot: Slot, rng: &mut dyn RngCore) -> Result<()> {
        let snapshot = self.snapshot();
        let mut next = Vec::with_capacity(self.cr_ids.len());
        for &cr in &self.cr_ids {
            next.push((cr, self.choose_channel(cr, slot, &snapshot, rng)?));
        }
        for (cr, ch) in next {
            self.state[cr.index()].tuned = Some(ch);
        }
        Ok(())
    }

    /// Starts dissemination of `msg` from `msg.injector` in `slot`.
    pub fn inject(&mut self, slot: Slot, msg: Message, log: &mut EventLog) -> Result<MsgId> {
        let node = msg.injector;
        let role = self.deployment.node(node)?.role;
        if role != Role::CrDevice {
            return Err(Error::InvalidArgument(format!("{node} is not a CR device")));
        }
        if msg.ttl == 0 {
            return Err(Error::InvalidArgument("injected message has ttl 0".into()));
        }
        if self.index.contains_key(&msg.id) {
            return Err(Error::InvalidArgument(format!("{} already injected", msg.id)));
        }
        let id = msg.id;
        let mut ev = Event::new(slot, EventKind::Inject, node).msg(id, msg.ttl);
        if let Some(pr) = msg.origin_pr {
            ev = ev.peer(pr);
        }
        log.push(ev);
        self.index.insert(id, self.records.len());
        self.records.push(MessageRecord {
            id,
            injector: node,
            origin_pr: msg.origin_pr,
            injected_at: slot,
            flags: DeliveryFlags {
                reached_cmr_neighbor: self.cmr_neighbor[node.index()],
                ..DeliveryFlags::default()
            },
            receivers: BTreeSet::new(),
            hops_to_cmr: None,
            cmr_arrival: None,
            portal_arrival: None,
        });
        let st = &mut self.state[node.index()];
        st.seen.insert(id);
        st.queue.push_back(Queued { msg, ready: slot });
        Ok(id)
    }

    /// Advances every node by one slot.
    pub fn step(&mut self, slot: Slot, rng: &mut dyn RngCore, log: &mut EventLog) -> Result<()> {
        self.step_inner(slot, None, rng, log).map(|_| ())
    }

    /// Lets only `cr` transmit in `slot` (its oldest ready message) and returns
    /// the nodes that received it.
    pub fn disseminate_step(
        &mut self,
        cr: NodeId,
        slot: Slot,
        rng: &mut dyn RngCore,
        log: &mut EventLog,
    ) -> Result<Vec<NodeId>> {
        self.deployment.node(cr)?;
        self.step_inner(slot, Some(cr), rng, log)
    }

    fn pop_ready(&mut self, node: NodeId, slot: Slot) -> Option<Message> {
        let q = &mut self.state[node.index()].queue;
        let k = q.iter().position(|e| e.ready <= slot)?;
        q.remove(k).map(|e| e.msg)
    }

    fn step_inner(
        &mut self,
        slot: Slot,
        only: Option<NodeId>,
        rng: &mut dyn RngCore,
        log: &mut EventLog,
    ) -> Result<Vec<NodeId>> {
        let snapshot = self.snapshot();
        let mut txs: Vec<(TxIntent, Message)> = Vec::new();
        let mut granted: BTreeSet<(NodeId, ChannelId)> = BTreeSet::new();

        match self.params.mode {
            Mode::MultiHop => {
                for k in 0..self.cr_ids.len() {
                    let cr = self.cr_ids[k];
                    if only.is_some_and(|o| o != cr) {
                        continue;
                    }
                    let Some(msg) = self.pop_ready(cr, slot) else {
                        continue;
                    };
                    let ch = self.choose_channel(cr, slot, &snapshot, rng)?;
                    txs.push((
                        TxIntent {
                            sender: cr,
                            channel: ch,
                        },
                        msg,
                    ));
                }
            }
            Mode::SingleHop => {
                let grants = match self.coordinator.as_mut() {
                    Some(c) => {
                        let views = &self.views;
                        let spectrum = self.spectrum;
                        c.grants(slot, &self.neighbors, |cmr, ch| {
                            views[cmr.index()].busy(spectrum, ch, slot)
                        })
                    }
                    None => Vec::new(),
                };
                for g in grants {
                    log.push(
                        Event::new(slot, EventKind::Poll, g.cmr)
                            .channel(g.channel)
                            .peer(g.cr),
                    );
                    granted.insert((g.cmr, g.channel));
                    if only.is_some_and(|o| o != g.cr) {
                        continue;
                    }
                    if let Some(msg) = self.pop_ready(g.cr, slot) {
                        txs.push((
                            TxIntent {
                                sender: g.cr,
                                channel: g.channel,
                            },
                            msg,
                        ));
                    }
                }
            }
        }

        for (intent, msg) in &mut txs {
            msg.hop_trace.push(Hop {
                node: intent.sender,
                slot,
                channel: intent.channel,
                ttl: msg.ttl,
            });
            log.push(
                Event::new(slot, EventKind::Tx, intent.sender)
                    .channel(intent.channel)
                    .msg(msg.id, msg.ttl),
            );
        }
        self.transmissions += txs.len() as u64;

        let intents: Vec<TxIntent> = txs.iter().map(|(i, _)| *i).collect();
        let transmitting: BTreeSet<NodeId> = intents.iter().map(|i| i.sender).collect();
        let outcomes = {
            let mode = self.params.mode;
            let nodes = &self.deployment.nodes;
            let state = &self.state;
            let listen = &self.cmr_listen;
            let views = &self.views;
            let spectrum = self.spectrum;
            medium::resolve(
                &intents,
                &self.neighbors,
                |v, ch| match mode {
                    Mode::SingleHop => granted.contains(&(v, ch)),
                    Mode::MultiHop => match nodes[v.index()].role {
                        Role::CrDevice => {
                            !transmitting.contains(&v) && state[v.index()].tuned == Some(ch)
                        }
                        Role::Cmr => listen[v.index()].contains(&ch),
                        _ => false,
                    },
                },
                |v, ch| views[v.index()].busy(spectrum, ch, slot),
            )
        };

        let mut received = Vec::new();
        for outcome in outcomes {
            match outcome {
                Outcome::Received { listener, tx } => {
                    let (intent, msg) = &txs[tx];
                    if self.deliver(listener, msg, intent, slot, rng, log) {
                        received.push(listener);
                    }
                }
                Outcome::PrBlocked { listener, tx } => {
                    let (intent, msg) = &txs[tx];
                    log.push(
                        Event::new(slot, EventKind::PrBlock, listener)
                            .channel(intent.channel)
                            .msg(msg.id, msg.ttl)
                            .peer(intent.sender),
                    );
                }
                Outcome::Collision {
                    listener,
                    channel,
                    senders,
                } => {
                    self.collisions += 1;
                    log.push(
                        Event::new(slot, EventKind::Collision, listener)
                            .channel(channel)
                            .peer(senders[0]),
                    );
                }
            }
        }

        if self.params.mode == Mode::MultiHop {
            for intent in &intents {
                self.state[intent.sender.index()].tuned = Some(intent.channel);
            }
        }
        Ok(received)
    }

    /// Applies one successful reception. Returns whether it was fresh.
    fn deliver(
        &mut self,
        listener: NodeId,
        msg: &Message,
        intent: &TxIntent,
        slot: Slot,
        rng: &mut dyn RngCore,
        log: &mut EventLog,
    ) -> bool {
        let id = msg.id;
        let ttl = msg.ttl - 1;
        if !self.state[listener.index()].seen.insert(id) {
            log.push(
                Event::new(slot, EventKind::Dup, listener)
                    .channel(intent.channel)
                    .msg(id, ttl)
                    .peer(intent.sender),
            );
            return false;
        }
        let k = self.index[&id];
        let role = self.deployment.nodes[listener.index()].role;
        let cmr_neighbor = self.cmr_neighbor[listener.index()];
        let rec = &mut self.records[k];
        rec.receivers.insert(listener);

        match role {
            Role::Cmr => {
                let hops = msg.hop_trace.len() as u32;
                rec.flags.reached_cmr = true;
                rec.flags.reached_cmr_neighbor = true;
                rec.hops_to_cmr = Some(rec.hops_to_cmr.map_or(hops, |h| h.min(hops)));
                rec.cmr_arrival = Some(rec.cmr_arrival.map_or(slot, |s| s.min(slot)));
                log.push(
                    Event::new(slot, EventKind::CmrRx, listener)
                        .channel(intent.channel)
                        .msg(id, ttl)
                        .peer(intent.sender),
                );
                match self.backbone.cmr_relay(listener, slot) {
                    RelayAction::Deliver { path, arrival } => {
                        rec.flags.reached_portal = true;
                        rec.portal_arrival =
                            Some(rec.portal_arrival.map_or(arrival, |s| s.min(arrival)));
                        let mut prev = listener;
                        for (h, &node) in path.iter().enumerate() {
                            let kind = if h + 1 == path.len() {
                                EventKind::Portal
                            } else {
                                EventKind::Relay
                            };
                            log.push(
                                Event::new(slot + h as u64 + 1, kind, node)
                                    .msg_only(id)
                                    .peer(prev),
                            );
                            prev = node;
                        }
                    }
                    RelayAction::Stuck => {
                        log.push(Event::new(slot, EventKind::Stuck, listener).msg_only(id));
                    }
                }
            }
            _ => {
                if cmr_neighbor {
                    rec.flags.reached_cmr_neighbor = true;
                }
                log.push(
                    Event::new(slot, EventKind::Rx, listener)
                        .channel(intent.channel)
                        .msg(id, ttl)
                        .peer(intent.sender),
                );
                let cap = self.params.queue_cap;
                let st = &mut self.state[listener.index()];
                if ttl >= 1 && (cap == 0 || st.queue.len() < cap) {
                    let jitter = if self.params.forward_jitter > 0 {
                        rng.gen_range(0..=self.params.forward_jitter)
                    } else {
                        0
                    };
                    let mut copy = msg.clone();
                    copy.ttl = ttl;
                    st.queue.push_back(Queued {
                        msg: copy,
                        ready: slot + 1 + jitter,
                    });
                }
            }
        }
        true
    }
}
