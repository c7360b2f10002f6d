//! World assembly: wires the devices, medium, and traffic generators into
//! one deterministic event loop.
//!
//! Node layout: the user phone, one AP carrying background traffic, the IoT
//! endpoints, plus one responder peer per CoAP session and a sink for the
//! download flow. Every stochastic draw comes from a named stream (`ir`,
//! `wifi`, `sweep`) so identical (scenario, seed) pairs replay identically.
//!
//! Timer events carry the transaction id, sweep position, or activation
//! epoch they were armed for; handlers drop events whose tag no longer
//! matches instead of cancelling, which keeps the queue append-only.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::iot_device::{EnergyReport, IotDevice, IotReaction, IrGate, SessionCheck};
use crate::ir_codec::{frame_to_pulses, pulses_to_frame, PulseTrain};
use crate::ir_link::{apply_outcome, sample_outcome};
use crate::report::ReportRow;
use crate::scenario::Scenario;
use crate::sim_engine::{RngStreams, Scheduler, TransactionRecord};
use crate::time::{SimDuration, SimTime};
use crate::user_device::{SweepStep, UserAction, UserDevice, UserPhase};
use crate::wifi_medium::{Channel, FrameKind, Mode, NodeId, WifiMedium};
use crate::wire::Message;

const USER_NODE: NodeId = NodeId(1);
const AP_NODE: NodeId = NodeId(2);
const IOT_NODE_BASE: u32 = 10;
const COAP_NODE_BASE: u32 = 100;
const SINK_NODE: NodeId = NodeId(200);
/// Processing delay of a CoAP responder.
const COAP_PROC: SimDuration = SimDuration::from_ms(3);

const FAR_FUTURE: SimTime = SimTime::from_ticks(u64::MAX);

#[derive(Debug, Clone)]
enum Ev {
    StartTxn,
    IrArrive { txn: u32 },
    SweepBegin { txn: u32 },
    SwitchDone { txn: u32, pos: usize },
    DwellEnd { txn: u32, pos: usize },
    CaptureDone { txn: u32 },
    UserSend { txn: u32, msg: Message },
    Retx { txn: u32 },
    CommandTimeout { txn: u32 },
    ResponseDone { txn: u32 },
    Deliver { to: NodeId, msg: Message },
    IotBeacon { iot: usize, epoch: u64 },
    IotSweepTimeout { iot: usize, epoch: u64 },
    IotSessionProbe { iot: usize, epoch: u64 },
    IotSend { iot: usize, msg: Message },
    CoapTick { session: usize },
    CoapReply { session: usize },
    DownloadTick,
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario_name: String,
    pub seed: u64,
    pub records: Vec<TransactionRecord>,
    /// CSV-ready rows in transaction order.
    pub rows: Vec<ReportRow>,
    /// Residual download throughput; None when the flow is disabled.
    pub download_mbps: Option<f64>,
    /// Per-device energy accounting over the run, keyed by device name.
    pub energy: BTreeMap<String, EnergyReport>,
    /// WiFi frames put on the air, keyed by node name (`user`, `ap`, device
    /// names).
    pub frames_sent: BTreeMap<String, u64>,
    pub user_final_channel: Channel,
    pub end_time: SimTime,
}

/// A parsed scenario ready to run.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
}

impl Simulation {
    #[must_use]
    pub fn new(scenario: Scenario) -> Self {
        Simulation { scenario }
    }

    #[must_use]
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Runs with the scenario's own seed.
    #[must_use]
    pub fn run(&self) -> RunOutput {
        self.run_with_seed(self.scenario.seed)
    }

    #[must_use]
    pub fn run_with_seed(&self, seed: u64) -> RunOutput {
        let mut world = World::build(&self.scenario, seed);
        let mut sched: Scheduler<Ev> = Scheduler::new();

        if self.scenario.runs > 0 {
            sched.schedule_at(SimTime::ZERO, Ev::StartTxn);
        } else {
            world.no_more_starts = true;
        }
        for (i, session) in self.scenario.coap.iter().enumerate() {
            sched.schedule_at(SimTime::ZERO + session.interval, Ev::CoapTick { session: i });
        }
        if self.scenario.download.is_some() {
            sched.schedule_at(SimTime::ZERO, Ev::DownloadTick);
        }

        loop {
            let txns_done = world.no_more_starts && world.collected == world.started;
            let limit = match (txns_done, world.horizon) {
                (true, None) => break,
                (true, Some(h)) => h,
                (false, _) => FAR_FUTURE,
            };
            match sched.pop_due(limit) {
                Some((at, ev)) => world.handle(&mut sched, at, ev),
                None => break,
            }
        }

        world.finish(sched.now())
    }
}

struct World<'a> {
    scenario: &'a Scenario,
    seed: u64,
    medium: WifiMedium,
    user: UserDevice,
    iot: Vec<IotDevice>,
    rng_ir: ChaCha8Rng,
    rng_wifi: ChaCha8Rng,
    rng_sweep: ChaCha8Rng,
    records: Vec<TransactionRecord>,
    current_train: Option<PulseTrain>,
    started: u32,
    collected: u32,
    last_start: SimTime,
    no_more_starts: bool,
    horizon: Option<SimTime>,
}

impl<'a> World<'a> {
    fn build(scenario: &'a Scenario, seed: u64) -> World<'a> {
        let streams = RngStreams::new(seed);
        let mut medium = WifiMedium::new(scenario.medium.clone());
        medium
            .attach(USER_NODE, scenario.user.channel, Mode::Monitor)
            .expect("fresh medium");
        medium.attach(AP_NODE, scenario.ap_channel, Mode::Normal).expect("fresh medium");
        let mut iot = Vec::with_capacity(scenario.iot.len());
        for (i, setup) in scenario.iot.iter().enumerate() {
            medium
                .attach(iot_node(i), setup.config.home_channel, Mode::Monitor)
                .expect("node ids are distinct");
            iot.push(IotDevice::new(setup.config.clone(), SimTime::ZERO));
        }
        for i in 0..scenario.coap.len() {
            medium
                .attach(NodeId(COAP_NODE_BASE + i as u32), scenario.ap_channel, Mode::Normal)
                .expect("node ids are distinct");
        }
        if scenario.download.is_some() {
            medium.attach(SINK_NODE, scenario.ap_channel, Mode::Normal).expect("node ids are distinct");
        }
        World {
            scenario,
            seed,
            medium,
            user: UserDevice::new(scenario.user.config.clone()),
            iot,
            rng_ir: streams.stream("ir"),
            rng_wifi: streams.stream("wifi"),
            rng_sweep: streams.stream("sweep"),
            records: Vec::with_capacity(scenario.runs as usize),
            current_train: None,
            started: 0,
            collected: 0,
            last_start: SimTime::ZERO,
            no_more_starts: false,
            horizon: scenario.duration.map(|d| SimTime::ZERO + d),
        }
    }

    fn handle(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, ev: Ev) {
        match ev {
            Ev::StartTxn => self.start_txn(sched, now),
            Ev::IrArrive { txn } => self.ir_arrive(sched, now, txn),
            Ev::SweepBegin { txn } => self.sweep_begin(sched, now, txn),
            Ev::SwitchDone { txn, pos } => self.switch_done(sched, now, txn, pos),
            Ev::DwellEnd { txn, pos } => self.dwell_end(sched, now, txn, pos),
            Ev::CaptureDone { txn } => self.capture_done(sched, now, txn),
            Ev::UserSend { txn, msg } => {
                if self.user.current_txn() == txn && self.user.phase() == UserPhase::Commanding {
                    self.broadcast_msg(sched, USER_NODE, &msg, now);
                }
            }
            Ev::Retx { txn } => {
                if let Some(cmd) = self.user.retx_due(txn) {
                    self.broadcast_msg(sched, USER_NODE, &cmd, now);
                    sched.schedule_in(self.user.config().retx_interval, Ev::Retx { txn });
                }
            }
            Ev::CommandTimeout { txn } => {
                if self.user.command_timeout_due(now, txn) {
                    self.collect(sched, now);
                }
            }
            Ev::ResponseDone { txn } => {
                if self.user.current_txn() == txn && self.user.phase() == UserPhase::Commanding {
                    self.user.response_processed(now);
                    self.collect(sched, now);
                }
            }
            Ev::Deliver { to, msg } => self.deliver(sched, now, to, msg),
            Ev::IotBeacon { iot, epoch } => {
                if let Some(beacon) = self.iot[iot].beacon_due(epoch) {
                    self.broadcast_msg(sched, iot_node(iot), &beacon, now);
                    let interval = self.iot[iot].config().beacon_interval;
                    sched.schedule_in(interval, Ev::IotBeacon { iot, epoch });
                }
            }
            Ev::IotSweepTimeout { iot, epoch } => {
                self.iot[iot].sweep_timeout_due(now, epoch);
            }
            Ev::IotSessionProbe { iot, epoch } => {
                if let SessionCheck::Deferred(at) = self.iot[iot].session_expiry_due(now, epoch) {
                    sched.schedule_at(at, Ev::IotSessionProbe { iot, epoch });
                }
            }
            Ev::IotSend { iot, msg } => {
                self.broadcast_msg(sched, iot_node(iot), &msg, now);
            }
            Ev::CoapTick { session } => self.coap_tick(sched, now, session),
            Ev::CoapReply { session } => {
                let bytes = self.scenario.coap[session].response_bytes;
                let src = NodeId(COAP_NODE_BASE + session as u32);
                self.broadcast_raw(src, FrameKind::Response, vec![0; bytes], now);
            }
            Ev::DownloadTick => self.download_tick(sched, now),
        }
    }

    fn start_txn(&mut self, sched: &mut Scheduler<Ev>, now: SimTime) {
        let txn = self.started + 1;
        let frame = self
            .user
            .start_transaction(now, txn)
            .expect("starts are serialized on completion");
        self.started += 1;
        self.last_start = now;
        let train = frame_to_pulses(&frame);
        let duration = train.total_duration();
        self.current_train = Some(train);
        sched.schedule_in(duration, Ev::IrArrive { txn });
    }

    /// The pulse train has fully left the emitter; every receiver sees its
    /// own corrupted copy and gates on the decode.
    fn ir_arrive(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, txn: u32) {
        let train = self.current_train.take().expect("one emission in flight");
        let env = &self.scenario.ir_environment;
        for (i, setup) in self.scenario.iot.iter().enumerate() {
            let outcome = sample_outcome(&setup.geometry, env, &mut self.rng_ir);
            let damaged = apply_outcome(&train, outcome, &mut self.rng_ir);
            let result = pulses_to_frame(&damaged, self.scenario.decode_tolerance);
            if let IrGate::Activated { epoch } = self.iot[i].on_ir(now, &result) {
                sched.schedule_in(SimDuration::ZERO, Ev::IotBeacon { iot: i, epoch });
                let timeout = self.iot[i].config().sweep_timeout;
                sched.schedule_in(timeout, Ev::IotSweepTimeout { iot: i, epoch });
            }
        }
        sched.schedule_in(self.user.config().context_switch, Ev::SweepBegin { txn });
    }

    fn sweep_begin(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, txn: u32) {
        let scan = self.medium.scan_rssi();
        let first = self.user.begin_sweep(now, &scan, &mut self.rng_sweep);
        let done = self.medium.set_channel(USER_NODE, first, now).expect("user attached");
        sched.schedule_at(done, Ev::SwitchDone { txn, pos: 0 });
    }

    fn switch_done(&mut self, sched: &mut Scheduler<Ev>, _now: SimTime, txn: u32, pos: usize) {
        if self.user.current_txn() != txn
            || self.user.phase() != UserPhase::Sweeping
            || self.user.sweep_pos() != pos
        {
            return;
        }
        sched.schedule_in(self.user.config().dwell, Ev::DwellEnd { txn, pos });
    }

    fn dwell_end(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, txn: u32, pos: usize) {
        if self.user.current_txn() != txn {
            return;
        }
        match self.user.dwell_expired(now, pos) {
            SweepStep::Stale => {}
            SweepStep::Next(channel) => {
                let done = self.medium.set_channel(USER_NODE, channel, now).expect("user attached");
                sched.schedule_at(done, Ev::SwitchDone { txn, pos: pos + 1 });
            }
            SweepStep::Exhausted => self.collect(sched, now),
        }
    }

    fn capture_done(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, txn: u32) {
        if self.user.current_txn() != txn || self.user.phase() != UserPhase::Sweeping {
            return;
        }
        let (ack, command) = self.user.capture_complete(now);
        let ack_frame = self.broadcast_msg(sched, USER_NODE, &ack, now);
        // The command queues behind the ack on the air.
        sched.schedule_in(ack_frame, Ev::UserSend { txn, msg: command });
        sched.schedule_in(self.user.config().retx_interval, Ev::Retx { txn });
        sched.schedule_in(self.user.config().command_timeout, Ev::CommandTimeout { txn });
    }

    fn deliver(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, to: NodeId, msg: Message) {
        if to == USER_NODE {
            // A switch begun during the frame's airtime aborts reception.
            if self.medium.is_switching(USER_NODE, now).expect("user attached") {
                return;
            }
            match self.user.on_frame(&msg) {
                UserAction::CaptureBeacon => {
                    let txn = self.user.current_txn();
                    sched.schedule_in(self.user.config().proc_delay, Ev::CaptureDone { txn });
                }
                UserAction::Finish => {
                    let txn = self.user.current_txn();
                    sched.schedule_in(self.user.config().proc_delay, Ev::ResponseDone { txn });
                }
                UserAction::Ignore => {}
            }
            return;
        }
        let Some(i) = iot_index(to, self.iot.len()) else { return };
        let was_session = self.iot[i].phase() == crate::iot_device::IotPhase::Session;
        let reaction = self.iot[i].on_frame(now, &msg);
        match reaction {
            IotReaction::SessionStarted => {
                let epoch = self.iot[i].epoch();
                sched.schedule_at(
                    self.iot[i].session_deadline(),
                    Ev::IotSessionProbe { iot: i, epoch },
                );
            }
            IotReaction::Respond(response) => {
                if !was_session && self.iot[i].phase() == crate::iot_device::IotPhase::Session {
                    // Command doubled as the ack; arm the expiry probe.
                    let epoch = self.iot[i].epoch();
                    sched.schedule_at(
                        self.iot[i].session_deadline(),
                        Ev::IotSessionProbe { iot: i, epoch },
                    );
                }
                let proc = self.iot[i].config().proc_delay;
                sched.schedule_in(proc, Ev::IotSend { iot: i, msg: response });
            }
            IotReaction::Ignore => {}
        }
    }

    fn coap_tick(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, session: usize) {
        let bytes = self.scenario.coap[session].request_bytes;
        let (airtime, outcomes) =
            self.broadcast_raw(AP_NODE, FrameKind::Command, vec![0; bytes], now);
        let peer = NodeId(COAP_NODE_BASE + session as u32);
        if outcomes.iter().any(|&(node, delivered)| node == peer && delivered) {
            sched.schedule_in(airtime + COAP_PROC, Ev::CoapReply { session });
        }
        let txns_done = self.no_more_starts && self.collected == self.started;
        let next = now + self.scenario.coap[session].interval;
        let within = self.horizon.map_or(true, |h| next <= h);
        if !txns_done && within {
            sched.schedule_at(next, Ev::CoapTick { session });
        }
    }

    fn download_tick(&mut self, sched: &mut Scheduler<Ev>, now: SimTime) {
        let flow = self.scenario.download.as_ref().expect("tick only when enabled");
        let bytes = flow.segment_bytes;
        let interval = flow.segment_interval();
        self.broadcast_raw(AP_NODE, FrameKind::Background, vec![0; bytes], now);
        let next = now + interval;
        if self.horizon.map_or(true, |h| next <= h) {
            sched.schedule_at(next, Ev::DownloadTick);
        }
    }

    /// Broadcasts a protocol message and schedules delivery events for the
    /// receivers that get it. Returns the frame airtime.
    fn broadcast_msg(
        &mut self,
        sched: &mut Scheduler<Ev>,
        src: NodeId,
        msg: &Message,
        now: SimTime,
    ) -> SimDuration {
        let kind = match msg {
            Message::Beacon { .. } => FrameKind::Beacon,
            Message::Ack { .. } | Message::Command { .. } => FrameKind::Command,
            Message::Response { .. } => FrameKind::Response,
        };
        let payload = msg.encode();
        let (frame, outcomes) = self
            .medium
            .broadcast(src, kind, payload, now, &mut self.rng_wifi)
            .expect("protocol frames are well formed");
        for (node, delivered) in outcomes {
            if delivered && (node == USER_NODE || iot_index(node, self.iot.len()).is_some()) {
                sched.schedule_in(frame.airtime, Ev::Deliver { to: node, msg: msg.clone() });
            }
        }
        frame.airtime
    }

    /// Broadcasts an opaque background payload; nobody parses it.
    fn broadcast_raw(
        &mut self,
        src: NodeId,
        kind: FrameKind,
        payload: Vec<u8>,
        now: SimTime,
    ) -> (SimDuration, Vec<(NodeId, bool)>) {
        let (frame, outcomes) = self
            .medium
            .broadcast(src, kind, payload, now, &mut self.rng_wifi)
            .expect("background frames are well formed");
        (frame.airtime, outcomes)
    }

    /// Harvests a terminal transaction and lines up the next start.
    fn collect(&mut self, sched: &mut Scheduler<Ev>, now: SimTime) {
        let record = self.user.take_record(self.seed);
        self.records.push(record);
        self.collected += 1;
        if self.started >= self.scenario.runs {
            self.no_more_starts = true;
            return;
        }
        let mut next = self.last_start + self.scenario.quicktalk_interval;
        if next < now {
            next = now;
        }
        if self.horizon.is_some_and(|h| next >= h) {
            self.no_more_starts = true;
            return;
        }
        sched.schedule_at(next, Ev::StartTxn);
    }

    fn finish(self, now: SimTime) -> RunOutput {
        let end_time = match self.horizon {
            Some(h) if h > now => h,
            _ => now,
        };
        let span_s = end_time.as_secs();
        let download_mbps = self
            .scenario
            .download
            .as_ref()
            .map(|flow| flow.achieved_mbps(u64::from(self.started), span_s.max(f64::MIN_POSITIVE)));

        let bg_sessions = self.scenario.coap.len();
        let bg_interval_s = self.scenario.coap.first().map_or(0.0, |s| s.interval.as_secs());
        let rows = self
            .records
            .iter()
            .map(|record| {
                ReportRow::from_record(
                    &self.scenario.name,
                    record,
                    bg_sessions,
                    bg_interval_s,
                    download_mbps.unwrap_or(0.0),
                )
            })
            .collect();

        let mut energy = BTreeMap::new();
        let mut frames_sent = BTreeMap::new();
        for (i, setup) in self.scenario.iot.iter().enumerate() {
            energy.insert(setup.name.clone(), self.iot[i].energy_report(end_time));
            frames_sent.insert(
                setup.name.clone(),
                self.medium.frames_sent_by(iot_node(i)).expect("attached"),
            );
        }
        frames_sent.insert("user".into(), self.medium.frames_sent_by(USER_NODE).expect("attached"));
        frames_sent.insert("ap".into(), self.medium.frames_sent_by(AP_NODE).expect("attached"));

        RunOutput {
            scenario_name: self.scenario.name.clone(),
            seed: self.seed,
            records: self.records,
            rows,
            download_mbps,
            energy,
            frames_sent,
            user_final_channel: self.medium.node_channel(USER_NODE).expect("attached"),
            end_time,
        }
    }
}

const fn iot_node(i: usize) -> NodeId {
    NodeId(IOT_NODE_BASE + i as u32)
}

fn iot_index(node: NodeId, count: usize) -> Option<usize> {
    let i = node.0.checked_sub(IOT_NODE_BASE)? as usize;
    (i < count).then_some(i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir_codec::frame_duration;
    use crate::ir_codec::IrFrame;
    use crate::report::render_csv;
    use crate::scenario::Strictness;

    fn lossless_base() -> String {
        "\
user.id = 171
user.filter = BULB
user.rounds = 2
user.dwell_ms = 40
medium.p0 = 0
medium.k = 0
iot.lamp.type = WHITE-BULB
iot.lamp.channel = 4
iot.lamp.processor = bulb
"
        .to_owned()
    }

    fn sim_from(text: &str) -> Simulation {
        let (scenario, warnings) = Scenario::parse("t", text, Strictness::Strict).unwrap();
        assert!(warnings.is_empty());
        Simulation::new(scenario)
    }

    #[test]
    fn lossless_transaction_succeeds_with_exact_composition() {
        let sim = sim_from(&lossless_base());
        let out = sim.run_with_seed(7);
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert!(r.success, "lossless run must succeed: {r:?}");
        assert_eq!(r.retx_count, 0);

        // t_e2e composes exactly: IR emission + context switch + search +
        // command.
        let scenario = sim.scenario();
        let frame = IrFrame::new(
            scenario.user.config.user_id,
            scenario.user.config.filter,
        )
        .unwrap();
        let ir_ms = frame_duration(&frame).as_ms();
        let composed = ir_ms + 3.0 + r.t_search_ms + r.t_command_ms;
        assert!(
            (r.t_e2e_ms - composed).abs() < 1e-9,
            "t_e2e {} vs composed {composed}",
            r.t_e2e_ms
        );

        // Search finds channel 4 in round 1: it is the 4th ascending visit.
        assert!(r.t_search_ms > 300.0 && r.t_search_ms < 400.0, "{}", r.t_search_ms);
        // Command completes without retransmission in a handful of ms.
        assert!(r.t_command_ms > 5.0 && r.t_command_ms < 8.0, "{}", r.t_command_ms);
        // The user radio stays parked on the detected channel.
        assert_eq!(out.user_final_channel.number(), 4);
        assert!(out.frames_sent["lamp"] > 0);
        assert_eq!(out.frames_sent["ap"], 0);
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let mut text = lossless_base().replace("medium.p0 = 0\n", "medium.p0 = 0.2\n");
        text.push_str("runs = 5\nquicktalk.interval_s = 1\n");
        let sim = sim_from(&text);
        let a = sim.run_with_seed(11);
        let b = sim.run_with_seed(11);
        assert_eq!(render_csv(&a.rows), render_csv(&b.rows));
        assert_eq!(a.end_time, b.end_time);

        let c = sim.run_with_seed(12);
        assert_ne!(
            render_csv(&a.rows),
            render_csv(&c.rows),
            "a lossy run must depend on the seed"
        );
    }

    #[test]
    fn coap_on_another_channel_does_not_touch_timing() {
        let quiet = sim_from(&lossless_base());
        let mut text = lossless_base();
        text.push_str("ap.channel = 9\ncoap.0.interval_s = 0.05\n");
        let busy = sim_from(&text);
        let a = quiet.run_with_seed(3);
        let b = busy.run_with_seed(3);
        assert_eq!(a.records[0].t_search_ms, b.records[0].t_search_ms);
        assert_eq!(a.records[0].t_command_ms, b.records[0].t_command_ms);
        assert_eq!(a.records[0].t_e2e_ms, b.records[0].t_e2e_ms);
        assert!(b.frames_sent["ap"] > 0, "coap requests flowed");
    }

    #[test]
    fn filter_mismatch_never_wakes_the_radio() {
        let mut text = lossless_base();
        // DISPLAY subtree does not cover a WHITE-BULB.
        text = text.replace("user.filter = BULB", "user.filter = DISPLAY");
        let sim = sim_from(&text);
        let out = sim.run_with_seed(5);
        let r = &out.records[0];
        assert!(!r.success);
        assert_eq!(r.t_command_ms, 0.0, "search failure books no command time");
        // Full plan of 2 rounds, 80 ms per visit.
        assert_eq!(r.t_search_ms, 22.0 * 80.0);
        assert_eq!(out.frames_sent["lamp"], 0, "gated device stays silent");
        assert_eq!(out.energy["lamp"].wifi_duty, 0.0);
    }

    #[test]
    fn out_of_range_device_is_never_triggered() {
        let mut text = lossless_base();
        text.push_str("iot.lamp.distance_m = 9.5\n");
        let sim = sim_from(&text);
        let out = sim.run_with_seed(5);
        assert!(!out.records[0].success);
        assert_eq!(out.frames_sent["lamp"], 0);
    }

    #[test]
    fn download_reports_residual_throughput() {
        let mut text = lossless_base();
        text.push_str("duration_s = 60\nruns = 20\ndownload.enabled = true\n");
        let sim = sim_from(&text);
        let out = sim.run_with_seed(2);
        assert_eq!(out.records.len(), 20);
        let mbps = out.download_mbps.unwrap();
        // 20 transactions over 60 s at the calibrated per-transaction cost.
        let expected = 18.54 * (1.0 - 20.0 * crate::traffic::TXN_AIRTIME_COST_S / 60.0);
        assert!((mbps - expected).abs() < 1e-9, "{mbps} vs {expected}");
        assert_eq!(out.end_time, SimTime::from_secs(60));
        assert!(out.rows.iter().all(|row| (row.download_mbps - mbps).abs() < 1e-12));
    }

    #[test]
    fn zero_runs_is_background_only() {
        let mut text = lossless_base();
        text.push_str("duration_s = 2\nruns = 0\ndownload.enabled = true\n");
        let sim = sim_from(&text);
        let out = sim.run_with_seed(2);
        assert!(out.records.is_empty());
        assert_eq!(out.download_mbps.unwrap(), 18.54);
        assert_eq!(out.frames_sent["user"], 0);
    }

    #[test]
    fn lossy_runs_retransmit_and_still_mostly_succeed() {
        let mut text = lossless_base().replace("medium.p0 = 0\n", "medium.p0 = 0.3\n");
        text.push_str("runs = 60\nquicktalk.interval_s = 8\n");
        let sim = sim_from(&text);
        let out = sim.run_with_seed(21);
        assert_eq!(out.records.len(), 60);
        let successes = out.records.iter().filter(|r| r.success).count();
        assert!(successes >= 50, "successes {successes}");
        assert!(
            out.records.iter().any(|r| r.retx_count > 0),
            "30% loss must force some retransmissions"
        );
        for r in &out.records {
            assert!(r.t_search_ms <= 22.0 * 80.0 + 1e-9);
        }
    }
}
