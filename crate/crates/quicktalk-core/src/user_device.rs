//! User-side controller: one IR pinpoint followed by a WiFi channel sweep,
//! then command retransmission until a response or timeout.
//!
//! The device is a passive state machine; the simulation owns the clock and
//! the radio. Methods take `now`, mutate phase and timing marks, and hand
//! back whatever the caller must put on the air or schedule. Stale timer
//! events (an old dwell expiry, a retransmit tick for a finished
//! transaction) are detected here by phase and position checks, so callers
//! never need to cancel.

use rand::Rng;
use thiserror::Error;

use crate::device_filter::DeviceTypeFilter;
use crate::ir_codec::IrFrame;
use crate::sim_engine::TransactionRecord;
use crate::time::{SimDuration, SimTime};
use crate::wifi_medium::{Channel, CHANNEL_COUNT};
use crate::wire::Message;

#[derive(Debug, Error, PartialEq)]
pub enum UserError {
    #[error("transaction already in flight (phase {0:?})")]
    Busy(UserPhase),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserPhase {
    Idle,
    IrSent,
    Sweeping,
    Commanding,
    Done,
    Failed,
}

/// Controller parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UserConfig {
    pub user_id: u32,
    pub filter: DeviceTypeFilter,
    /// Strongest-RSSI channels visited first in each sweep round.
    pub k_top: usize,
    /// Full passes over all channels before the search gives up.
    pub sweep_rounds: u32,
    /// Listen time per channel visit.
    pub dwell: SimDuration,
    /// Command repeat period while unanswered.
    pub retx_interval: SimDuration,
    /// Gives up on the command phase after this long.
    pub command_timeout: SimDuration,
    /// IR service to WiFi service handover on the phone.
    pub context_switch: SimDuration,
    /// Frame processing delay between delivery and reaction.
    pub proc_delay: SimDuration,
    pub command_body: Vec<u8>,
}

impl UserConfig {
    #[must_use]
    pub fn new(user_id: u32, filter: DeviceTypeFilter) -> Self {
        UserConfig {
            user_id,
            filter,
            k_top: 4,
            sweep_rounds: 3,
            dwell: SimDuration::from_ms(50),
            retx_interval: SimDuration::from_ms(250),
            command_timeout: SimDuration::from_secs(5),
            context_switch: SimDuration::from_ms(3),
            proc_delay: SimDuration::from_ms(3),
            command_body: b"toggle".to_vec(),
        }
    }
}

/// Builds the full visit order for one search.
///
/// `scan` must already be sorted by descending RSSI. Each round starts with
/// the top `k_top` scanned channels rotated from a uniformly random index,
/// then covers every remaining channel in ascending order; with no scan data
/// a round is simply channels 1..=11. Every round visits all 11 channels, so
/// the plan length is always `11 * rounds`.
#[must_use]
pub fn build_sweep_plan(
    scan: &[(Channel, f64)],
    k_top: usize,
    rounds: u32,
    rng: &mut impl Rng,
) -> Vec<Channel> {
    let top: Vec<Channel> = scan.iter().take(k_top).map(|&(c, _)| c).collect();
    let mut plan = Vec::with_capacity(CHANNEL_COUNT as usize * rounds as usize);
    for _ in 0..rounds {
        if top.is_empty() {
            plan.extend(Channel::all());
        } else {
            let start = rng.gen_range(0..top.len());
            plan.extend(top.iter().cycle().skip(start).take(top.len()));
            plan.extend(Channel::all().filter(|c| !top.contains(c)));
        }
    }
    plan
}

/// What the simulation must do after feeding a frame to the device.
#[derive(Debug, Clone, PartialEq)]
pub enum UserAction {
    /// Beacon latched; call [`UserDevice::capture_complete`] after the
    /// processing delay.
    CaptureBeacon,
    /// Response latched; call [`UserDevice::response_processed`] after the
    /// processing delay.
    Finish,
    Ignore,
}

/// Outcome of a dwell expiry.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepStep {
    /// Switch to this channel and dwell again.
    Next(Channel),
    /// Plan exhausted; the transaction failed in the search phase.
    Exhausted,
    /// Event outlived the visit it was armed for.
    Stale,
}

#[derive(Debug)]
pub struct UserDevice {
    config: UserConfig,
    phase: UserPhase,
    txn_id: u32,
    plan: Vec<Channel>,
    plan_pos: usize,
    /// Device id latched from the first matching beacon.
    detected: Option<u32>,
    finishing: bool,
    retx_count: u32,
    t_start: SimTime,
    wifi_start: SimTime,
    command_first: SimTime,
    t_end: SimTime,
    t_search: SimDuration,
    t_command: SimDuration,
}

impl UserDevice {
    #[must_use]
    pub fn new(config: UserConfig) -> Self {
        UserDevice {
            config,
            phase: UserPhase::Idle,
            txn_id: 0,
            plan: Vec::new(),
            plan_pos: 0,
            detected: None,
            finishing: false,
            retx_count: 0,
            t_start: SimTime::ZERO,
            wifi_start: SimTime::ZERO,
            command_first: SimTime::ZERO,
            t_end: SimTime::ZERO,
            t_search: SimDuration::ZERO,
            t_command: SimDuration::ZERO,
        }
    }

    #[must_use]
    pub fn config(&self) -> &UserConfig {
        &self.config
    }

    #[must_use]
    pub fn phase(&self) -> UserPhase {
        self.phase
    }

    #[must_use]
    pub fn current_txn(&self) -> u32 {
        self.txn_id
    }

    #[must_use]
    pub fn plan_len(&self) -> usize {
        self.plan.len()
    }

    /// Begins a transaction: emits the pinpoint frame. Rejected while a
    /// previous transaction is still in flight.
    pub fn start_transaction(&mut self, now: SimTime, txn_id: u32) -> Result<IrFrame, UserError> {
        if self.phase != UserPhase::Idle {
            return Err(UserError::Busy(self.phase));
        }
        self.phase = UserPhase::IrSent;
        self.txn_id = txn_id;
        self.t_start = now;
        self.detected = None;
        self.finishing = false;
        self.retx_count = 0;
        self.t_search = SimDuration::ZERO;
        self.t_command = SimDuration::ZERO;
        Ok(IrFrame::new(self.config.user_id, self.config.filter).expect("config validated"))
    }

    /// Starts the WiFi search once the radio handover is done. Returns the
    /// first channel to visit; the search clock starts here.
    pub fn begin_sweep(&mut self, now: SimTime, scan: &[(Channel, f64)], rng: &mut impl Rng) -> Channel {
        assert_eq!(self.phase, UserPhase::IrSent, "sweep without a pinpoint");
        self.plan = build_sweep_plan(scan, self.config.k_top, self.config.sweep_rounds, rng);
        self.plan_pos = 0;
        self.wifi_start = now;
        self.phase = UserPhase::Sweeping;
        self.plan[0]
    }

    /// Position of the visit currently armed, for pairing with dwell events.
    #[must_use]
    pub fn sweep_pos(&self) -> usize {
        self.plan_pos
    }

    /// A dwell timer fired for visit `pos`.
    pub fn dwell_expired(&mut self, now: SimTime, pos: usize) -> SweepStep {
        if self.phase != UserPhase::Sweeping || pos != self.plan_pos || self.detected.is_some() {
            return SweepStep::Stale;
        }
        self.plan_pos += 1;
        if self.plan_pos == self.plan.len() {
            self.phase = UserPhase::Failed;
            self.t_search = now.since(self.wifi_start);
            self.t_command = SimDuration::ZERO;
            self.t_end = now;
            SweepStep::Exhausted
        } else {
            SweepStep::Next(self.plan[self.plan_pos])
        }
    }

    /// A frame reached the phone's capture interface.
    pub fn on_frame(&mut self, msg: &Message) -> UserAction {
        match msg {
            Message::Beacon { user_id, device_id } => {
                if self.phase == UserPhase::Sweeping
                    && self.detected.is_none()
                    && *user_id == self.config.user_id
                {
                    // First matching beacon wins; the sweep freezes here.
                    self.detected = Some(*device_id);
                    UserAction::CaptureBeacon
                } else {
                    UserAction::Ignore
                }
            }
            Message::Response { txn_id, user_id, .. } => {
                if self.phase == UserPhase::Commanding
                    && !self.finishing
                    && *txn_id == self.txn_id
                    && *user_id == self.config.user_id
                {
                    self.finishing = true;
                    UserAction::Finish
                } else {
                    UserAction::Ignore
                }
            }
            _ => UserAction::Ignore,
        }
    }

    /// Beacon parsing finished; the command phase begins. Returns the ack
    /// and the first command to broadcast now.
    pub fn capture_complete(&mut self, now: SimTime) -> (Message, Message) {
        assert_eq!(self.phase, UserPhase::Sweeping, "capture without sweep");
        let device_id = self.detected.expect("capture without latched beacon");
        self.t_search = now.since(self.wifi_start);
        self.phase = UserPhase::Commanding;
        self.command_first = now;
        let user_id = self.config.user_id;
        let ack = Message::Ack { user_id, device_id };
        let command = Message::Command {
            txn_id: self.txn_id,
            user_id,
            device_id,
            body: self.config.command_body.clone(),
        };
        (ack, command)
    }

    /// Periodic retransmit tick. Returns the command copy to send, or None
    /// when the tick is stale and the cycle must stop.
    pub fn retx_due(&mut self, txn_id: u32) -> Option<Message> {
        if self.phase != UserPhase::Commanding || txn_id != self.txn_id || self.finishing {
            return None;
        }
        self.retx_count += 1;
        let device_id = self.detected.expect("commanding without device");
        Some(Message::Command {
            txn_id: self.txn_id,
            user_id: self.config.user_id,
            device_id,
            body: self.config.command_body.clone(),
        })
    }

    /// Command-phase deadline. True when the transaction just failed.
    pub fn command_timeout_due(&mut self, now: SimTime, txn_id: u32) -> bool {
        if self.phase != UserPhase::Commanding || txn_id != self.txn_id || self.finishing {
            return false;
        }
        self.phase = UserPhase::Failed;
        // Failure in the command phase books the full timeout.
        self.t_command = self.config.command_timeout;
        self.t_end = now;
        true
    }

    /// Response parsing finished; the transaction succeeded.
    pub fn response_processed(&mut self, now: SimTime) {
        assert!(self.finishing, "finish without latched response");
        self.phase = UserPhase::Done;
        self.t_command = now.since(self.command_first);
        self.t_end = now;
    }

    /// Harvests the record of a terminal transaction and returns to idle.
    pub fn take_record(&mut self, seed: u64) -> TransactionRecord {
        let success = match self.phase {
            UserPhase::Done => true,
            UserPhase::Failed => false,
            other => panic!("record taken in non-terminal phase {other:?}"),
        };
        let record = TransactionRecord {
            txn_id: self.txn_id,
            t_search_ms: self.t_search.as_ms(),
            t_command_ms: self.t_command.as_ms(),
            t_e2e_ms: self.t_end.since(self.t_start).as_ms(),
            retx_count: self.retx_count,
            success,
            seed,
        };
        self.phase = UserPhase::Idle;
        record
    }
}
