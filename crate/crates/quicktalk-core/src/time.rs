//! Simulation time base.
//!
//! All timestamps and durations are integer counts of 0.5 µs ticks. The IR
//! symbol timings (562.5 µs, 1687.5 µs) are odd multiples of half a
//! microsecond, so a 1 µs base would force rounding; at 0.5 µs every protocol
//! constant in the system is exactly representable. External reporting
//! converts to milliseconds with three decimals.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

/// Ticks per microsecond.
pub const TICKS_PER_US: u64 = 2;
/// Ticks per millisecond.
pub const TICKS_PER_MS: u64 = 2_000;
/// Ticks per second.
pub const TICKS_PER_SEC: u64 = 2_000_000;

/// Absolute instant on the virtual clock, in 0.5 µs ticks since run start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

/// Span between two instants, in 0.5 µs ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimDuration(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    #[must_use]
    pub const fn from_ticks(ticks: u64) -> Self {
        SimTime(ticks)
    }

    #[must_use]
    pub const fn ticks(self) -> u64 {
        self.0
    }

    /// Instant `ms` milliseconds after run start.
    #[must_use]
    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * TICKS_PER_MS)
    }

    /// Instant `s` seconds after run start.
    #[must_use]
    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * TICKS_PER_SEC)
    }

    /// Milliseconds since run start, exact for any tick count below 2^52.
    #[must_use]
    pub fn as_ms(self) -> f64 {
        self.0 as f64 / TICKS_PER_MS as f64
    }

    #[must_use]
    pub fn as_secs(self) -> f64 {
        self.0 as f64 / TICKS_PER_SEC as f64
    }

    /// Span from an earlier instant. Panics if `earlier` is in the future.
    #[must_use]
    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.checked_sub(earlier.0).expect("time went backwards"))
    }
}

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    #[must_use]
    pub const fn from_ticks(ticks: u64) -> Self {
        SimDuration(ticks)
    }

    #[must_use]
    pub const fn from_half_us(half_us: u64) -> Self {
        SimDuration(half_us)
    }

    #[must_use]
    pub const fn from_us(us: u64) -> Self {
        SimDuration(us * TICKS_PER_US)
    }

    #[must_use]
    pub const fn from_ms(ms: u64) -> Self {
        SimDuration(ms * TICKS_PER_MS)
    }

    #[must_use]
    pub const fn from_secs(s: u64) -> Self {
        SimDuration(s * TICKS_PER_SEC)
    }

    /// Nearest-tick duration from fractional seconds. Intended for scenario
    /// values like `0.1` s; sub-tick remainders round to the closest tick.
    #[must_use]
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "duration must be finite and non-negative");
        SimDuration((s * TICKS_PER_SEC as f64).round() as u64)
    }

    #[must_use]
    pub const fn ticks(self) -> u64 {
        self.0
    }

    #[must_use]
    pub fn as_us(self) -> f64 {
        self.0 as f64 / TICKS_PER_US as f64
    }

    #[must_use]
    pub fn as_ms(self) -> f64 {
        self.0 as f64 / TICKS_PER_MS as f64
    }

    #[must_use]
    pub fn as_secs(self) -> f64 {
        self.0 as f64 / TICKS_PER_SEC as f64
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign<SimDuration> for SimTime {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Sub<SimTime> for SimTime {
    type Output = SimDuration;
    fn sub(self, rhs: SimTime) -> SimDuration {
        self.since(rhs)
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl AddAssign for SimDuration {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Sub for SimDuration {
    type Output = SimDuration;
    fn sub(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0.checked_sub(rhs.0).expect("negative duration"))
    }
}

impl Mul<u64> for SimDuration {
    type Output = SimDuration;
    fn mul(self, rhs: u64) -> SimDuration {
        SimDuration(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ms", self.as_ms())
    }
}

impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ms", self.as_ms())
    }
}
