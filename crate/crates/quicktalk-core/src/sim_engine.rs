//! Deterministic discrete-event engine.
//!
//! Events execute in strict (timestamp, sequence) order: ties break by
//! schedule order, so a run is a pure function of the scenario and the master
//! seed. Randomness comes from named ChaCha streams derived from the master
//! seed by hashing, which keeps draws independent between concerns (IR
//! outcomes, WiFi losses, sweep rotation) and byte-reproducible across
//! platforms.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("percentile of an empty sample set")]
    EmptySamples,
    #[error("percentile rank {0} outside [0, 100]")]
    RankOutOfRange(f64),
}

/// Token for cancelling a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<T> {
    at: SimTime,
    seq: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    // Reversed so the BinaryHeap pops the earliest (timestamp, sequence).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Event queue plus virtual clock.
pub struct Scheduler<T> {
    heap: BinaryHeap<Entry<T>>,
    pending: HashSet<u64>,
    next_seq: u64,
    now: SimTime,
}

impl<T> Default for Scheduler<T> {
    fn default() -> Self {
        Scheduler::new()
    }
}

impl<T> Scheduler<T> {
    #[must_use]
    pub fn new() -> Self {
        Scheduler {
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }

    #[must_use]
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Pending (scheduled, not yet executed or cancelled) event count.
    #[must_use]
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `payload` after `delay`. Delays are unsigned, so an event
    /// can never land in the past.
    pub fn schedule_in(&mut self, delay: SimDuration, payload: T) -> EventHandle {
        self.schedule_at(self.now + delay, payload)
    }

    /// Schedules at an absolute instant; panics if `at` precedes the clock.
    pub fn schedule_at(&mut self, at: SimTime, payload: T) -> EventHandle {
        assert!(at >= self.now, "event scheduled in the past");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.heap.push(Entry { at, seq, payload });
        EventHandle(seq)
    }

    /// Cancels a pending event. Returns false if it already executed or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0)
    }

    /// Pops the next event with timestamp ≤ `until`, advancing the clock to
    /// its timestamp. Cancelled entries are skipped.
    pub fn pop_due(&mut self, until: SimTime) -> Option<(SimTime, T)> {
        loop {
            let at = self.heap.peek()?.at;
            if at > until {
                return None;
            }
            let entry = self.heap.pop().expect("peeked entry present");
            if self.pending.remove(&entry.seq) {
                debug_assert!(entry.at >= self.now, "clock must be monotone");
                self.now = entry.at;
                return Some((entry.at, entry.payload));
            }
        }
    }

    /// Executes every event with timestamp ≤ `until` through `handler`,
    /// leaving the clock at `until`. Returns the executed count. The run is
    /// resumable: consecutive calls with growing horizons equal one call
    /// with the final horizon.
    pub fn run_until<F>(&mut self, until: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Self, SimTime, T),
    {
        let mut executed = 0;
        while let Some((at, payload)) = self.pop_due(until) {
            handler(self, at, payload);
            executed += 1;
        }
        if self.now < until {
            self.now = until;
        }
        executed
    }
}

/// Named, independent RNG streams derived from one master seed.
///
/// A stream's seed is SHA-256 over the little-endian master seed and the
/// stream name, so streams never overlap and adding a stream never perturbs
/// existing ones.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    master_seed: u64,
}

impl RngStreams {
    #[must_use]
    pub fn new(master_seed: u64) -> Self {
        RngStreams { master_seed }
    }

    #[must_use]
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    #[must_use]
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(name.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        ChaCha8Rng::from_seed(digest)
    }
}

/// Nearest-rank percentile: the ⌈p/100 · n⌉-th order statistic.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, EngineError> {
    if !(0.0..=100.0).contains(&p) {
        return Err(EngineError::RankOutOfRange(p));
    }
    if samples.is_empty() {
        return Err(EngineError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Per-transaction metrics emitted by the simulation.
///
/// `t_e2e_ms` composes as IR emission + context switch + `t_search_ms` +
/// `t_command_ms` for successful transactions. A command-phase failure
/// records the command timeout as `t_command_ms`; a search-phase failure
/// never starts the command phase and records 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub txn_id: u32,
    pub t_search_ms: f64,
    pub t_command_ms: f64,
    pub t_e2e_ms: f64,
    pub retx_count: u32,
    pub success: bool,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn executes_in_timestamp_then_sequence_order() {
        let mut sched: Scheduler<&str> = Scheduler::new();
        sched.schedule_in(SimDuration::from_ms(5), "b");
        sched.schedule_in(SimDuration::from_ms(1), "a");
        sched.schedule_in(SimDuration::from_ms(5), "c"); // tie with "b", scheduled later
        let mut order = Vec::new();
        let n = sched.run_until(SimTime::from_ticks(u64::MAX), |_, at, tag| {
            order.push((at.as_ms(), tag));
        });
        assert_eq!(n, 3);
        assert_eq!(order, vec![(1.0, "a"), (5.0, "b"), (5.0, "c")]);
    }

    #[test]
    fn cancel_prevents_execution() {
        let mut sched: Scheduler<u32> = Scheduler::new();
        let keep = sched.schedule_in(SimDuration::from_ms(1), 1);
        let drop = sched.schedule_in(SimDuration::from_ms(2), 2);
        assert_eq!(sched.len(), 2);
        assert!(sched.cancel(drop));
        assert!(!sched.cancel(drop), "double cancel must report false");
        let mut seen = Vec::new();
        sched.run_until(SimTime::from_ticks(u64::MAX), |_, _, v| seen.push(v));
        assert_eq!(seen, vec![1]);
        assert!(!sched.cancel(keep), "executed event cannot be cancelled");
    }

    #[test]
    fn run_until_advances_clock_and_is_resumable() {
        // Trace equality: one full run equals two half runs.
        let build = || {
            let mut sched: Scheduler<u32> = Scheduler::new();
            for i in 0..10u32 {
                sched.schedule_in(SimDuration::from_ms(u64::from(i) * 3), i);
            }
            sched
        };

        let mut full = build();
        let mut full_trace = Vec::new();
        full.run_until(SimTime::from_ticks(60_000), |_, at, v| full_trace.push((at, v)));

        let mut halves = build();
        let mut half_trace = Vec::new();
        halves.run_until(SimTime::from_ticks(25_000), |_, at, v| half_trace.push((at, v)));
        assert_eq!(halves.now(), SimTime::from_ticks(25_000), "clock parks at the horizon");
        halves.run_until(SimTime::from_ticks(60_000), |_, at, v| half_trace.push((at, v)));

        assert_eq!(full_trace, half_trace);
        assert_eq!(halves.now(), SimTime::from_ticks(60_000));
    }

    #[test]
    fn handler_observes_event_time_and_can_schedule() {
        let mut sched: Scheduler<u32> = Scheduler::new();
        sched.schedule_in(SimDuration::from_ms(10), 0);
        let mut fired = Vec::new();
        sched.run_until(SimTime::from_ticks(u64::MAX), |s, at, v| {
            assert_eq!(s.now(), at, "causality: clock equals event time in handler");
            fired.push((at.as_ms(), v));
            if v < 3 {
                s.schedule_in(SimDuration::from_ms(10), v + 1);
            }
        });
        assert_eq!(fired, vec![(10.0, 0), (20.0, 1), (30.0, 2), (40.0, 3)]);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_panics() {
        let mut sched: Scheduler<u32> = Scheduler::new();
        sched.schedule_in(SimDuration::from_ms(1), 0);
        sched.run_until(SimTime::from_ticks(u64::MAX), |_, _, _| {});
        sched.schedule_at(SimTime::ZERO, 1);
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let streams = RngStreams::new(42);
        let a: Vec<u64> = (0..8).map(|_| streams.stream("wifi").gen::<u64>()).collect();
        // Re-created stream restarts identically.
        let b: Vec<u64> = {
            let mut rng = streams.stream("wifi");
            (0..8).map(|_| rng.gen::<u64>()).collect()
        };
        assert_eq!(a[0], b[0]);

        let mut wifi = streams.stream("wifi");
        let mut ir = streams.stream("ir");
        let w: Vec<u64> = (0..8).map(|_| wifi.gen()).collect();
        let i: Vec<u64> = (0..8).map(|_| ir.gen()).collect();
        assert_ne!(w, i, "different names must give different streams");

        let other = RngStreams::new(43);
        let mut wifi43 = other.stream("wifi");
        let w43: Vec<u64> = (0..8).map(|_| wifi43.gen()).collect();
        assert_ne!(w, w43, "different master seeds must give different streams");
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 5.0);
        let w: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&w, 90.0).unwrap(), 9.0);
        assert_eq!(percentile(&w, 91.0).unwrap(), 10.0);
        assert_eq!(percentile(&[7.5], 50.0).unwrap(), 7.5);
        assert_eq!(percentile(&[], 50.0), Err(EngineError::EmptySamples));
        assert_eq!(percentile(&v, 101.0), Err(EngineError::RankOutOfRange(101.0)));
        // Unsorted input is handled.
        assert_eq!(percentile(&[5.0, 1.0, 3.0], 50.0).unwrap(), 3.0);
    }
}
