//! Association-free 11-channel broadcast medium.
//!
//! No 802.11 management traffic is modeled: every frame is a broadcast on
//! one channel, received by every attached node currently listening there.
//! Channel switching makes a node deaf and mute for a fixed delay. Loss is
//! Bernoulli per receiver with probability p0 + k · load, where load is the
//! airtime fraction on the channel over a trailing window; control
//! broadcasts ride the 1 Mbps basic rate while background payloads ride
//! 54 Mbps.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

/// Channels 1..=11.
pub const CHANNEL_COUNT: u8 = 11;
/// Maximum payload bytes per frame.
pub const MAX_PAYLOAD: usize = 1500;
/// Loss probability ceiling; a saturated channel still delivers occasionally.
pub const LOSS_CEILING: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
pub enum MediumError {
    #[error("channel {0} outside 1..={CHANNEL_COUNT}")]
    BadChannel(u8),
    #[error("node {0} already attached")]
    DuplicateNode(NodeId),
    #[error("node {0} not attached")]
    UnknownNode(NodeId),
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD}")]
    PayloadTooLarge(usize),
}

/// WiFi channel number, 1..=11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel(u8);

impl Channel {
    pub fn new(n: u8) -> Result<Self, MediumError> {
        if (1..=CHANNEL_COUNT).contains(&n) {
            Ok(Channel(n))
        } else {
            Err(MediumError::BadChannel(n))
        }
    }

    #[must_use]
    pub const fn number(self) -> u8 {
        self.0
    }

    /// All channels in ascending order.
    pub fn all() -> impl Iterator<Item = Channel> {
        (1..=CHANNEL_COUNT).map(Channel)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Attached radio identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Capture mode. Monitor-mode nodes run packet capture without association;
/// the distinction is bookkeeping only, since all frames here are broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Monitor,
    Normal,
}

/// Frame class; selects the airtime rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Beacon,
    Command,
    Response,
    Background,
}

impl FrameKind {
    /// Control broadcasts ride the basic rate.
    #[must_use]
    pub const fn is_control(self) -> bool {
        !matches!(self, FrameKind::Background)
    }
}

/// One on-air frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastFrame {
    pub src: NodeId,
    pub channel: Channel,
    pub kind: FrameKind,
    pub payload: Vec<u8>,
    pub airtime: SimDuration,
}

/// Medium parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumConfig {
    /// Deaf-and-mute time for a channel switch.
    pub switch_delay: SimDuration,
    /// Base loss probability p0 at zero load.
    pub base_loss: f64,
    /// Loss growth per unit channel load (the k coefficient).
    pub loss_slope: f64,
    /// Control broadcast rate in Mbps.
    pub control_rate_mbps: f64,
    /// Background payload rate in Mbps.
    pub data_rate_mbps: f64,
    /// AP beacon strength per channel as seen by a scan, dBm.
    pub rssi_dbm: BTreeMap<Channel, f64>,
    /// Trailing window for the load estimate.
    pub load_window: SimDuration,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            switch_delay: SimDuration::from_ms(40),
            base_loss: 0.064,
            loss_slope: 0.3,
            control_rate_mbps: 1.0,
            data_rate_mbps: 54.0,
            rssi_dbm: BTreeMap::new(),
            load_window: SimDuration::from_secs(1),
        }
    }
}

#[derive(Debug)]
struct NodeState {
    channel: Channel,
    mode: Mode,
    switching_until: Option<SimTime>,
    frames_sent: u64,
}

/// Trailing-window airtime ledger for one channel. `busy` carries the tick
/// sum of the live entries so a load query is O(pruned), not O(window).
#[derive(Debug, Default)]
struct ChannelLedger {
    entries: VecDeque<(SimTime, SimDuration)>,
    busy: u64,
}

impl ChannelLedger {
    fn push(&mut self, at: SimTime, airtime: SimDuration) {
        self.entries.push_back((at, airtime));
        self.busy += airtime.ticks();
    }

    fn prune(&mut self, horizon: SimTime) {
        while let Some(&(at, airtime)) = self.entries.front() {
            if at < horizon {
                self.entries.pop_front();
                self.busy -= airtime.ticks();
            } else {
                break;
            }
        }
    }
}

/// The shared medium: attachments, switching state, and per-channel airtime
/// ledgers.
#[derive(Debug)]
pub struct WifiMedium {
    config: MediumConfig,
    nodes: BTreeMap<NodeId, NodeState>,
    ledgers: BTreeMap<Channel, ChannelLedger>,
    pub frames_broadcast: u64,
    pub deliveries: u64,
    pub losses: u64,
}

impl WifiMedium {
    #[must_use]
    pub fn new(config: MediumConfig) -> Self {
        WifiMedium {
            config,
            nodes: BTreeMap::new(),
            ledgers: BTreeMap::new(),
            frames_broadcast: 0,
            deliveries: 0,
            losses: 0,
        }
    }

    #[must_use]
    pub fn config(&self) -> &MediumConfig {
        &self.config
    }

    pub fn attach(&mut self, id: NodeId, channel: Channel, mode: Mode) -> Result<(), MediumError> {
        if self.nodes.contains_key(&id) {
            return Err(MediumError::DuplicateNode(id));
        }
        self.nodes.insert(id, NodeState { channel, mode, switching_until: None, frames_sent: 0 });
        Ok(())
    }

    pub fn node_channel(&self, id: NodeId) -> Result<Channel, MediumError> {
        Ok(self.state(id)?.channel)
    }

    pub fn node_mode(&self, id: NodeId) -> Result<Mode, MediumError> {
        Ok(self.state(id)?.mode)
    }

    /// Frames this node has put on the air.
    pub fn frames_sent_by(&self, id: NodeId) -> Result<u64, MediumError> {
        Ok(self.state(id)?.frames_sent)
    }

    pub fn is_switching(&self, id: NodeId, at: SimTime) -> Result<bool, MediumError> {
        Ok(self.state(id)?.switching_until.is_some_and(|t| t > at))
    }

    fn state(&self, id: NodeId) -> Result<&NodeState, MediumError> {
        self.nodes.get(&id).ok_or(MediumError::UnknownNode(id))
    }

    /// Begins a channel switch; the node is deaf and mute until the returned
    /// completion instant. Retargets immediately: switching to the current
    /// channel still costs the full delay (uniform model).
    pub fn set_channel(&mut self, id: NodeId, target: Channel, now: SimTime) -> Result<SimTime, MediumError> {
        let delay = self.config.switch_delay;
        let node = self.nodes.get_mut(&id).ok_or(MediumError::UnknownNode(id))?;
        node.channel = target;
        let done = now + delay;
        node.switching_until = Some(done);
        Ok(done)
    }

    /// Airtime for a payload of `len` bytes under `kind`'s rate.
    #[must_use]
    pub fn airtime(&self, kind: FrameKind, len: usize) -> SimDuration {
        let rate = if kind.is_control() { self.config.control_rate_mbps } else { self.config.data_rate_mbps };
        // bits / (rate Mbps) µs, expressed in 0.5 µs ticks.
        let ticks = (len as f64 * 8.0 * 2.0 / rate).round() as u64;
        SimDuration::from_ticks(ticks.max(1))
    }

    /// Airtime fraction on `channel` over the trailing load window.
    pub fn channel_load(&mut self, channel: Channel, now: SimTime) -> f64 {
        let window = self.config.load_window;
        let ledger = self.ledgers.entry(channel).or_default();
        let horizon = if now.ticks() > window.ticks() {
            SimTime::from_ticks(now.ticks() - window.ticks())
        } else {
            SimTime::ZERO
        };
        ledger.prune(horizon);
        ledger.busy as f64 / window.ticks() as f64
    }

    /// Current loss probability on `channel`: clamp(p0 + k · load, 0, 0.99).
    pub fn loss_probability(&mut self, channel: Channel, now: SimTime) -> f64 {
        let load = self.channel_load(channel, now);
        (self.config.base_loss + self.config.loss_slope * load).clamp(0.0, LOSS_CEILING)
    }

    /// AP beacon survey: channels sorted by descending RSSI, ties by
    /// ascending channel number. Deterministic given the config; empty when
    /// no AP signals are configured.
    #[must_use]
    pub fn scan_rssi(&self) -> Vec<(Channel, f64)> {
        let mut scan: Vec<(Channel, f64)> = self.config.rssi_dbm.iter().map(|(&c, &dbm)| (c, dbm)).collect();
        scan.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scan
    }

    /// Puts one broadcast on the air at `now`.
    ///
    /// Returns the frame (with computed airtime) and, for every other node
    /// on the channel, whether the frame reaches it at `now + airtime`.
    /// Nodes still switching at delivery time never receive. The sender must
    /// be attached and not itself switching.
    pub fn broadcast(
        &mut self,
        src: NodeId,
        kind: FrameKind,
        payload: Vec<u8>,
        now: SimTime,
        rng: &mut impl Rng,
    ) -> Result<(BroadcastFrame, Vec<(NodeId, bool)>), MediumError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(MediumError::PayloadTooLarge(payload.len()));
        }
        let channel = self.node_channel(src)?;
        assert!(
            !self.is_switching(src, now).expect("sender attached"),
            "sender {src} transmitted while switching"
        );
        let airtime = self.airtime(kind, payload.len());
        let delivery = now + airtime;
        let p_loss = self.loss_probability(channel, now);

        let mut outcomes = Vec::new();
        for (&id, node) in &self.nodes {
            if id == src || node.channel != channel {
                continue;
            }
            let deaf = node.switching_until.is_some_and(|t| t > delivery);
            let delivered = !deaf && rng.gen::<f64>() >= p_loss;
            if delivered {
                self.deliveries += 1;
            } else {
                self.losses += 1;
            }
            outcomes.push((id, delivered));
        }

        self.ledgers.entry(channel).or_default().push(now, airtime);
        self.frames_broadcast += 1;
        self.nodes.get_mut(&src).expect("sender attached").frames_sent += 1;

        let frame = BroadcastFrame { src, channel, kind, payload, airtime };
        Ok((frame, outcomes))
    }
}
