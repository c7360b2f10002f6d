//! IoT endpoint: IR-gated wake, beacon announcement, command session.
//!
//! The WiFi radio stays off until a decodable pinpoint frame passes the
//! type filter. Only then does the device beacon its identity on its home
//! channel, wait for the user to ack, and serve commands until the session
//! idles out. Commands are deduplicated by transaction id so retransmitted
//! copies apply exactly once.
//!
//! Like [`crate::user_device`], this is a passive state machine driven by
//! the simulation clock. Activations are numbered by an epoch counter;
//! timer events carry the epoch they were armed in and are ignored when it
//! no longer matches.

use std::collections::BTreeMap;

use crate::device_filter::DeviceType;
use crate::ir_codec::DecodeResult;
use crate::time::{SimDuration, SimTime};
use crate::wifi_medium::Channel;
use crate::wire::{Message, STATUS_ERROR, STATUS_OK};

/// IR receiver draw, always on (mW).
pub const IR_RECEIVER_MW: f64 = 15.8;
/// WiFi radio draw while beaconing or in session (mW).
pub const WIFI_ACTIVE_MW: f64 = 1100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IotPhase {
    Dormant,
    Beaconing,
    Session,
}

/// Application behavior behind the command interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandProcessor {
    /// Replies with the request body.
    Echo,
    /// `toggle` flips the lamp and reports the new state.
    BulbToggle,
    /// `read` returns a fresh sample counter per transaction.
    SensorRead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IotConfig {
    pub device_id: u32,
    pub device_type: DeviceType,
    pub home_channel: Channel,
    /// Beacon period while announcing.
    pub beacon_interval: SimDuration,
    /// Beaconing gives up this long after activation without an ack.
    pub sweep_timeout: SimDuration,
    /// Session closes after this long without traffic from the user.
    pub session_timeout: SimDuration,
    /// Frame processing delay between delivery and reaction.
    pub proc_delay: SimDuration,
    pub processor: CommandProcessor,
}

impl IotConfig {
    #[must_use]
    pub fn new(device_id: u32, device_type: DeviceType, home_channel: Channel) -> Self {
        IotConfig {
            device_id,
            device_type,
            home_channel,
            beacon_interval: SimDuration::from_ms(40),
            sweep_timeout: SimDuration::from_secs(5),
            session_timeout: SimDuration::from_secs(10),
            proc_delay: SimDuration::from_ms(3),
            processor: CommandProcessor::Echo,
        }
    }
}

/// Outcome of an IR frame hitting the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrGate {
    /// Frame decoded and the filter matched; WiFi wakes. Carries the new
    /// activation epoch for timer events.
    Activated { epoch: u64 },
    /// Undecodable, partial, parity-failed, or filter mismatch: no state
    /// change, no radio.
    Ignored,
}

/// Reaction to a WiFi frame.
#[derive(Debug, Clone, PartialEq)]
pub enum IotReaction {
    /// Ack received; session open. Schedule an expiry probe at the deadline.
    SessionStarted,
    /// Command served; broadcast this response after the processing delay.
    /// A command during beaconing doubles as an implicit ack, so the caller
    /// should also arm the expiry probe when the phase just changed.
    Respond(Message),
    Ignore,
}

/// Result of a session expiry probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionCheck {
    /// Deadline passed; the device went dormant.
    Expired,
    /// Traffic refreshed the deadline; probe again at this instant.
    Deferred(SimTime),
    /// A newer activation superseded the probed session.
    Stale,
}

/// Per-phase time and energy accounting. The IR receiver draws its 15.8 mW
/// in every phase; the WiFi radio adds 1100 mW outside DORMANT.
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    current: IotPhase,
    since: SimTime,
    dormant: SimDuration,
    beaconing: SimDuration,
    session: SimDuration,
}

/// Snapshot of the ledger at a given instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub dormant_s: f64,
    pub beaconing_s: f64,
    pub session_s: f64,
    /// Fraction of total time with the WiFi radio on.
    pub wifi_duty: f64,
    pub ir_mj: f64,
    pub wifi_mj: f64,
    pub total_mj: f64,
    /// IR receiver's share of total energy.
    pub ir_share: f64,
}

impl EnergyLedger {
    #[must_use]
    pub fn new(start: SimTime) -> Self {
        EnergyLedger {
            current: IotPhase::Dormant,
            since: start,
            dormant: SimDuration::ZERO,
            beaconing: SimDuration::ZERO,
            session: SimDuration::ZERO,
        }
    }

    fn book(&mut self, until: SimTime) {
        let span = until.since(self.since);
        match self.current {
            IotPhase::Dormant => self.dormant += span,
            IotPhase::Beaconing => self.beaconing += span,
            IotPhase::Session => self.session += span,
        }
        self.since = until;
    }

    pub fn transition(&mut self, now: SimTime, next: IotPhase) {
        self.book(now);
        self.current = next;
    }

    #[must_use]
    pub fn report(&self, now: SimTime) -> EnergyReport {
        let mut closed = self.clone();
        closed.book(now);
        let dormant_s = closed.dormant.as_secs();
        let beaconing_s = closed.beaconing.as_secs();
        let session_s = closed.session.as_secs();
        let total_s = dormant_s + beaconing_s + session_s;
        let active_s = beaconing_s + session_s;
        // mW times s gives mJ directly.
        let ir_mj = IR_RECEIVER_MW * total_s;
        let wifi_mj = WIFI_ACTIVE_MW * active_s;
        let total_mj = ir_mj + wifi_mj;
        EnergyReport {
            dormant_s,
            beaconing_s,
            session_s,
            wifi_duty: if total_s > 0.0 { active_s / total_s } else { 0.0 },
            ir_mj,
            wifi_mj,
            total_mj,
            ir_share: if total_mj > 0.0 { ir_mj / total_mj } else { 1.0 },
        }
    }
}

#[derive(Debug)]
pub struct IotDevice {
    config: IotConfig,
    phase: IotPhase,
    epoch: u64,
    captured_user: u32,
    session_deadline: SimTime,
    /// Response replay cache, keyed by transaction id, for the current
    /// activation.
    served: BTreeMap<u32, (u8, Vec<u8>)>,
    beacons_sent: u64,
    commands_applied: u64,
    bulb_on: bool,
    sensor_sample: u32,
    energy: EnergyLedger,
}

impl IotDevice {
    #[must_use]
    pub fn new(config: IotConfig, start: SimTime) -> Self {
        IotDevice {
            config,
            phase: IotPhase::Dormant,
            epoch: 0,
            captured_user: 0,
            session_deadline: SimTime::ZERO,
            served: BTreeMap::new(),
            beacons_sent: 0,
            commands_applied: 0,
            bulb_on: false,
            sensor_sample: 0,
            energy: EnergyLedger::new(start),
        }
    }

    #[must_use]
    pub fn config(&self) -> &IotConfig {
        &self.config
    }

    #[must_use]
    pub fn phase(&self) -> IotPhase {
        self.phase
    }

    #[must_use]
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    #[must_use]
    pub fn beacons_sent(&self) -> u64 {
        self.beacons_sent
    }

    /// Commands that actually executed (replays excluded).
    #[must_use]
    pub fn commands_applied(&self) -> u64 {
        self.commands_applied
    }

    #[must_use]
    pub fn bulb_on(&self) -> bool {
        self.bulb_on
    }

    #[must_use]
    pub fn energy_report(&self, now: SimTime) -> EnergyReport {
        self.energy.report(now)
    }

    /// An IR pulse train finished at the receiver, already classified by the
    /// decoder. Gating rule: only a fully decodable frame whose filter
    /// matches this device's type wakes the radio. A fresh activation
    /// supersedes any beaconing or session in progress.
    pub fn on_ir(&mut self, now: SimTime, result: &DecodeResult) -> IrGate {
        let frame = match result {
            DecodeResult::Decodable(frame) => frame,
            _ => return IrGate::Ignored,
        };
        if !frame.filter().matches(&self.config.device_type) {
            return IrGate::Ignored;
        }
        self.epoch += 1;
        self.captured_user = frame.user_id();
        self.served.clear();
        self.energy.transition(now, IotPhase::Beaconing);
        self.phase = IotPhase::Beaconing;
        IrGate::Activated { epoch: self.epoch }
    }

    /// Beacon timer tick. Some(beacon) keeps the cycle alive; None means the
    /// tick outlived its activation and the caller stops rescheduling.
    pub fn beacon_due(&mut self, epoch: u64) -> Option<Message> {
        if self.phase != IotPhase::Beaconing || epoch != self.epoch {
            return None;
        }
        self.beacons_sent += 1;
        Some(Message::Beacon {
            user_id: self.captured_user,
            device_id: self.config.device_id,
        })
    }

    /// Announcement deadline. True when the device just gave up and went
    /// dormant.
    pub fn sweep_timeout_due(&mut self, now: SimTime, epoch: u64) -> bool {
        if self.phase != IotPhase::Beaconing || epoch != self.epoch {
            return false;
        }
        self.energy.transition(now, IotPhase::Dormant);
        self.phase = IotPhase::Dormant;
        true
    }

    /// A WiFi frame reached the radio. Dormant devices have the radio off
    /// and see nothing.
    pub fn on_frame(&mut self, now: SimTime, msg: &Message) -> IotReaction {
        if self.phase == IotPhase::Dormant {
            return IotReaction::Ignore;
        }
        match msg {
            Message::Ack { user_id, device_id } => {
                if self.phase == IotPhase::Beaconing
                    && *device_id == self.config.device_id
                    && *user_id == self.captured_user
                {
                    self.open_session(now);
                    IotReaction::SessionStarted
                } else {
                    IotReaction::Ignore
                }
            }
            Message::Command { txn_id, user_id, device_id, body } => {
                if *device_id != self.config.device_id || *user_id != self.captured_user {
                    return IotReaction::Ignore;
                }
                // A command during beaconing means the ack was lost; treat
                // it as the ack and serve it.
                self.open_session(now);
                let (status, reply) = self.serve(*txn_id, body);
                IotReaction::Respond(Message::Response {
                    txn_id: *txn_id,
                    user_id: *user_id,
                    device_id: *device_id,
                    status,
                    body: reply,
                })
            }
            _ => IotReaction::Ignore,
        }
    }

    fn open_session(&mut self, now: SimTime) {
        if self.phase != IotPhase::Session {
            self.energy.transition(now, IotPhase::Session);
            self.phase = IotPhase::Session;
        }
        self.session_deadline = now + self.config.session_timeout;
    }

    #[must_use]
    pub fn session_deadline(&self) -> SimTime {
        self.session_deadline
    }

    /// Expiry probe armed at an earlier deadline.
    pub fn session_expiry_due(&mut self, now: SimTime, epoch: u64) -> SessionCheck {
        if self.phase != IotPhase::Session || epoch != self.epoch {
            return SessionCheck::Stale;
        }
        if self.session_deadline > now {
            return SessionCheck::Deferred(self.session_deadline);
        }
        self.energy.transition(now, IotPhase::Dormant);
        self.phase = IotPhase::Dormant;
        SessionCheck::Expired
    }

    /// Executes or replays a command. Replays return the cached response
    /// byte for byte and do not touch application state.
    fn serve(&mut self, txn_id: u32, body: &[u8]) -> (u8, Vec<u8>) {
        if let Some(cached) = self.served.get(&txn_id) {
            return cached.clone();
        }
        let result = self.apply(body);
        self.commands_applied += 1;
        self.served.insert(txn_id, result.clone());
        result
    }

    fn apply(&mut self, body: &[u8]) -> (u8, Vec<u8>) {
        match self.config.processor {
            CommandProcessor::Echo => (STATUS_OK, body.to_vec()),
            CommandProcessor::BulbToggle => {
                if body == b"toggle" {
                    self.bulb_on = !self.bulb_on;
                    (STATUS_OK, vec![u8::from(self.bulb_on)])
                } else {
                    (STATUS_ERROR, Vec::new())
                }
            }
            CommandProcessor::SensorRead => {
                if body == b"read" {
                    self.sensor_sample += 1;
                    (STATUS_OK, self.sensor_sample.to_be_bytes().to_vec())
                } else {
                    (STATUS_ERROR, Vec::new())
                }
            }
        }
    }
}
