//! 40-bit NEC-format IR frames and their pulse-train modulation.
//!
//! Frame layout, transmitted MSB-first: 24-bit user id, 14-bit device-type
//! filter, 2-bit parity. Parity is even parity computed over the two halves
//! of the 38-bit data word (user id and filter): bit 0 covers the low 19
//! bits, bit 1 the high 19 bits, so any single data-bit flip disturbs
//! exactly one parity bit.
//!
//! Modulation is pulse-distance: a fixed 562.5 µs mark starts every symbol
//! and the following space length selects the bit value. The train begins
//! with a 9 ms / 4.5 ms lead code and ends with a single stop mark. The NEC
//! repetition block is intentionally omitted: one user action emits exactly
//! one frame, and reliability is delegated to the WiFi phase.

use thiserror::Error;

use crate::device_filter::{DeviceTypeFilter, FilterError};
use crate::time::SimDuration;

/// Lead code mark: 9000 µs carrier ON.
pub const LEAD_MARK: SimDuration = SimDuration::from_half_us(18_000);
/// Lead code space: 4500 µs OFF.
pub const LEAD_SPACE: SimDuration = SimDuration::from_half_us(9_000);
/// Symbol mark: 562.5 µs ON, identical for both bit values.
pub const BIT_MARK: SimDuration = SimDuration::from_half_us(1_125);
/// Space selecting bit 0: 562.5 µs OFF.
pub const ZERO_SPACE: SimDuration = SimDuration::from_half_us(1_125);
/// Space selecting bit 1: 1687.5 µs OFF.
pub const ONE_SPACE: SimDuration = SimDuration::from_half_us(3_375);
/// Trailing stop mark: 562.5 µs ON.
pub const STOP_MARK: SimDuration = SimDuration::from_half_us(1_125);

/// Payload bits per frame.
pub const FRAME_BITS: usize = 40;
/// Segments in a well-formed train: lead mark/space, 40 mark/space symbol
/// pairs, stop mark.
pub const FRAME_SEGMENTS: usize = 2 + 2 * FRAME_BITS + 1;

/// Default decoder timing tolerance (fraction of the nominal duration).
pub const DEFAULT_TOLERANCE: f64 = 0.25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("user id {0:#08x} exceeds 24 bits")]
    UserIdTooWide(u32),
    #[error("payload {0:#012x} exceeds 40 bits")]
    PayloadTooWide(u64),
    #[error("embedded parity {found:#04b} does not match computed {computed:#04b}")]
    ParityMismatch { found: u8, computed: u8 },
    #[error("embedded filter code invalid: {0}")]
    BadFilter(#[from] FilterError),
    #[error("`{0}` is not a 10-digit hex payload")]
    BadHex(String),
}

/// IR carrier state for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseState {
    On,
    Off,
}

/// One constant-state stretch of the emitted waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseSegment {
    pub state: PulseState,
    pub duration: SimDuration,
}

/// Ordered pulse segments as seen by a receiver.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PulseTrain {
    pub segments: Vec<PulseSegment>,
}

impl PulseTrain {
    #[must_use]
    pub fn total_duration(&self) -> SimDuration {
        self.segments
            .iter()
            .fold(SimDuration::ZERO, |acc, seg| acc + seg.duration)
    }

    fn push(&mut self, state: PulseState, duration: SimDuration) {
        self.segments.push(PulseSegment { state, duration });
    }
}

/// Decoded, parity-checked frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IrFrame {
    user_id: u32,
    filter: DeviceTypeFilter,
    parity: u8,
}

/// Receiver classification of a pulse train.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeResult {
    /// Lead code, all 40 symbols, parity, and filter discipline all check out.
    Decodable(IrFrame),
    /// Lead code recognized but the payload cannot be trusted.
    PartiallyDecodable,
    /// No recognizable lead code.
    Undetectable,
}

/// Even parity over the two 19-bit halves of the 38-bit data word
/// `(user_id << 14) | filter_code`. Returns `(bit1 << 1) | bit0` where bit 0
/// covers data bits 0..19 and bit 1 covers data bits 19..38.
#[must_use]
pub fn compute_parity(user_id: u32, filter_code: u16) -> u8 {
    debug_assert!(user_id < 1 << 24);
    debug_assert!(filter_code < 1 << 14);
    let data = ((user_id as u64) << 14) | filter_code as u64;
    let low = data & 0x7_FFFF;
    let high = (data >> 19) & 0x7_FFFF;
    let bit0 = (low.count_ones() & 1) as u8;
    let bit1 = (high.count_ones() & 1) as u8;
    (bit1 << 1) | bit0
}

impl IrFrame {
    /// Builds a frame, computing parity. The filter is valid by construction;
    /// only the user id width can be rejected here.
    pub fn new(user_id: u32, filter: DeviceTypeFilter) -> Result<Self, CodecError> {
        if user_id >= 1 << 24 {
            return Err(CodecError::UserIdTooWide(user_id));
        }
        let parity = compute_parity(user_id, filter.encode());
        Ok(IrFrame { user_id, filter, parity })
    }

    #[must_use]
    pub const fn user_id(self) -> u32 {
        self.user_id
    }

    #[must_use]
    pub const fn filter(self) -> DeviceTypeFilter {
        self.filter
    }

    #[must_use]
    pub const fn parity(self) -> u8 {
        self.parity
    }

    /// The 40-bit payload word in wire order (user id in the high bits).
    #[must_use]
    pub fn payload_bits(self) -> u64 {
        ((self.user_id as u64) << 16) | ((self.filter.encode() as u64) << 2) | self.parity as u64
    }

    /// Rebuilds a frame from a 40-bit payload word, verifying parity and
    /// filter discipline.
    pub fn from_payload_bits(payload: u64) -> Result<Self, CodecError> {
        if payload >= 1 << 40 {
            return Err(CodecError::PayloadTooWide(payload));
        }
        let user_id = (payload >> 16) as u32;
        let code = ((payload >> 2) & 0x3FFF) as u16;
        let parity = (payload & 0b11) as u8;
        let computed = compute_parity(user_id, code);
        if parity != computed {
            return Err(CodecError::ParityMismatch { found: parity, computed });
        }
        let filter = DeviceTypeFilter::decode(code)?;
        Ok(IrFrame { user_id, filter, parity })
    }

    /// Ten uppercase hex digits, MSB-first over the payload; the log/CSV
    /// representation.
    #[must_use]
    pub fn to_hex(self) -> String {
        format!("{:010X}", self.payload_bits())
    }

    pub fn parse_hex(s: &str) -> Result<Self, CodecError> {
        if s.len() != 10 {
            return Err(CodecError::BadHex(s.to_string()));
        }
        let payload = u64::from_str_radix(s, 16).map_err(|_| CodecError::BadHex(s.to_string()))?;
        IrFrame::from_payload_bits(payload)
    }
}

impl std::fmt::Display for IrFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Modulates a frame into its pulse train: lead code, 40 pulse-distance
/// symbols MSB-first, stop mark.
#[must_use]
pub fn frame_to_pulses(frame: &IrFrame) -> PulseTrain {
    payload_to_pulses(frame.payload_bits())
}

/// Modulates a raw 40-bit word, valid frame or not. Fault-injection tests
/// use this to put deliberately corrupt payloads on the air.
///
/// # Panics
///
/// Panics when `payload` exceeds 40 bits.
#[must_use]
pub fn payload_to_pulses(payload: u64) -> PulseTrain {
    assert!(payload < 1 << FRAME_BITS, "payload exceeds {FRAME_BITS} bits");
    let mut train = PulseTrain { segments: Vec::with_capacity(FRAME_SEGMENTS) };
    train.push(PulseState::On, LEAD_MARK);
    train.push(PulseState::Off, LEAD_SPACE);
    for i in (0..FRAME_BITS).rev() {
        train.push(PulseState::On, BIT_MARK);
        let space = if (payload >> i) & 1 == 1 { ONE_SPACE } else { ZERO_SPACE };
        train.push(PulseState::Off, space);
    }
    train.push(PulseState::On, STOP_MARK);
    train
}

/// Total on-air time of a frame in closed form:
/// lead (13.5 ms) + stop (0.5625 ms) + 1.125 ms per zero bit + 2.25 ms per
/// one bit. Equals the segment sum of [`frame_to_pulses`] exactly.
#[must_use]
pub fn frame_duration(frame: &IrFrame) -> SimDuration {
    payload_duration(frame.payload_bits())
}

/// Same closed form for a raw 40-bit word, whether or not it parses as a
/// frame. The range is [59.0625, 104.0625] ms.
///
/// # Panics
///
/// Panics when `payload` exceeds 40 bits.
#[must_use]
pub fn payload_duration(payload: u64) -> SimDuration {
    assert!(payload < 1 << FRAME_BITS, "payload exceeds {FRAME_BITS} bits");
    let ones = u64::from(payload.count_ones());
    let zeros = FRAME_BITS as u64 - ones;
    LEAD_MARK + LEAD_SPACE + STOP_MARK + (BIT_MARK + ZERO_SPACE) * zeros + (BIT_MARK + ONE_SPACE) * ones
}

fn within(observed: SimDuration, nominal: SimDuration, tolerance: f64) -> bool {
    let observed = observed.ticks() as f64;
    let nominal = nominal.ticks() as f64;
    (observed - nominal).abs() <= tolerance * nominal
}

/// Demodulates a pulse train.
///
/// `tolerance` is the accepted fractional deviation per segment and must lie
/// in `[0, 0.5)`; below 0.5 the two space classes cannot overlap, so symbol
/// classification is unambiguous. A missing or deformed lead code yields
/// [`DecodeResult::Undetectable`]; after a good lead code, any
/// unclassifiable symbol, truncation, parity mismatch, or malformed filter
/// yields [`DecodeResult::PartiallyDecodable`].
#[must_use]
pub fn pulses_to_frame(train: &PulseTrain, tolerance: f64) -> DecodeResult {
    assert!(
        (0.0..0.5).contains(&tolerance),
        "tolerance must lie in [0, 0.5), got {tolerance}"
    );
    let segs = &train.segments;
    let lead_ok = segs.len() >= 2
        && segs[0].state == PulseState::On
        && within(segs[0].duration, LEAD_MARK, tolerance)
        && segs[1].state == PulseState::Off
        && within(segs[1].duration, LEAD_SPACE, tolerance);
    if !lead_ok {
        return DecodeResult::Undetectable;
    }
    if segs.len() != FRAME_SEGMENTS {
        return DecodeResult::PartiallyDecodable;
    }
    let mut payload: u64 = 0;
    for bit in 0..FRAME_BITS {
        let mark = segs[2 + 2 * bit];
        let space = segs[3 + 2 * bit];
        if mark.state != PulseState::On
            || !within(mark.duration, BIT_MARK, tolerance)
            || space.state != PulseState::Off
        {
            return DecodeResult::PartiallyDecodable;
        }
        let value = if within(space.duration, ZERO_SPACE, tolerance) {
            0
        } else if within(space.duration, ONE_SPACE, tolerance) {
            1
        } else {
            return DecodeResult::PartiallyDecodable;
        };
        payload = (payload << 1) | value;
    }
    let stop = segs[FRAME_SEGMENTS - 1];
    if stop.state != PulseState::On || !within(stop.duration, STOP_MARK, tolerance) {
        return DecodeResult::PartiallyDecodable;
    }
    match IrFrame::from_payload_bits(payload) {
        Ok(frame) => DecodeResult::Decodable(frame),
        Err(_) => DecodeResult::PartiallyDecodable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent parity oracle: explicit per-bit loop over the data word,
    /// rather than popcount over masked halves.
    fn parity_oracle(user_id: u32, code: u16) -> u8 {
        let data = ((user_id as u64) << 14) | code as u64;
        let mut ones_low = 0u32;
        let mut ones_high = 0u32;
        for i in 0..38 {
            if (data >> i) & 1 == 1 {
                if i < 19 {
                    ones_low += 1;
                } else {
                    ones_high += 1;
                }
            }
        }
        (((ones_high % 2) as u8) << 1) | ((ones_low % 2) as u8)
    }

    fn arbitrary_filter(rng: &mut impl Rng) -> DeviceTypeFilter {
        loop {
            let l1 = rng.gen_range(0..16);
            let l2 = if l1 == 0 { 0 } else { rng.gen_range(0..16) };
            let l3 = if l2 == 0 { 0 } else { rng.gen_range(0..64) };
            if let Ok(f) = DeviceTypeFilter::new(l1, l2, l3) {
                return f;
            }
        }
    }

    fn arbitrary_frame(rng: &mut impl Rng) -> IrFrame {
        IrFrame::new(rng.gen_range(0..1 << 24), arbitrary_filter(rng)).unwrap()
    }

    #[test]
    fn parity_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..2_000 {
            let user = rng.gen_range(0..1u32 << 24);
            let code = rng.gen_range(0..1u16 << 14);
            assert_eq!(compute_parity(user, code), parity_oracle(user, code));
        }
        // All-ones data word: 19 ones per half, both parity bits set.
        assert_eq!(compute_parity(0xFF_FFFF, 0x3FFF), 0b11);
        assert_eq!(compute_parity(0, 0), 0b00);
    }

    #[test]
    fn single_data_bit_flip_disturbs_exactly_one_parity_bit() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..500 {
            let user = rng.gen_range(0..1u32 << 24);
            let code = rng.gen_range(0..1u16 << 14);
            let before = compute_parity(user, code);
            let flip = rng.gen_range(0..38);
            let (user2, code2) = if flip < 14 {
                (user, code ^ (1 << flip))
            } else {
                (user ^ (1 << (flip - 14)), code)
            };
            let after = compute_parity(user2, code2);
            assert_eq!((before ^ after).count_ones(), 1, "flip at data bit {flip}");
        }
    }

    #[test]
    fn user_id_width_is_enforced() {
        let filter = DeviceTypeFilter::WILDCARD;
        assert!(IrFrame::new(0xFF_FFFF, filter).is_ok());
        assert!(matches!(
            IrFrame::new(1 << 24, filter),
            Err(CodecError::UserIdTooWide(_))
        ));
    }

    #[test]
    fn pulse_train_shape() {
        let frame = IrFrame::new(0xA1B2C3, DeviceTypeFilter::new(2, 1, 1).unwrap()).unwrap();
        let train = frame_to_pulses(&frame);
        assert_eq!(train.segments.len(), FRAME_SEGMENTS);
        assert_eq!(train.segments[0], PulseSegment { state: PulseState::On, duration: LEAD_MARK });
        assert_eq!(train.segments[1], PulseSegment { state: PulseState::Off, duration: LEAD_SPACE });
        assert_eq!(
            *train.segments.last().unwrap(),
            PulseSegment { state: PulseState::On, duration: STOP_MARK }
        );
        // Strict mark/space alternation.
        for (i, seg) in train.segments.iter().enumerate() {
            let expect = if i % 2 == 0 { PulseState::On } else { PulseState::Off };
            assert_eq!(seg.state, expect, "segment {i}");
        }
    }

    #[test]
    fn extreme_payload_durations() {
        // All-zero payload: 13.5 + 40 x 1.125 + 0.5625 = 59.0625 ms.
        let zero = IrFrame::from_payload_bits(0).unwrap();
        assert_eq!(frame_to_pulses(&zero).total_duration().as_ms(), 59.0625);
        assert_eq!(frame_duration(&zero).as_ms(), 59.0625);

        // All-one payload: 13.5 + 40 x 2.25 + 0.5625 = 104.0625 ms.
        let ones = IrFrame::from_payload_bits((1u64 << 40) - 1);
        // The all-ones payload carries parity 0b11 which is self-consistent.
        let ones = ones.unwrap();
        assert_eq!(frame_duration(&ones).as_ms(), 104.0625);

        // Exactly 20 one bits: 81.5625 ms.
        let mut rng = StdRng::seed_from_u64(13);
        loop {
            let frame = arbitrary_frame(&mut rng);
            if frame.payload_bits().count_ones() == 20 {
                assert_eq!(frame_duration(&frame).as_ms(), 81.5625);
                break;
            }
        }
    }

    #[test]
    fn closed_form_matches_segment_sum() {
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..500 {
            let frame = arbitrary_frame(&mut rng);
            assert_eq!(frame_duration(&frame), frame_to_pulses(&frame).total_duration());
        }
    }

    #[test]
    fn hex_representation_round_trips() {
        let frame = IrFrame::new(0xA1B2C3, DeviceTypeFilter::new(1, 2, 3).unwrap()).unwrap();
        let hex = frame.to_hex();
        assert_eq!(hex.len(), 10);
        assert_eq!(IrFrame::parse_hex(&hex).unwrap(), frame);
        assert!(IrFrame::parse_hex("XYZ").is_err());
        assert!(IrFrame::parse_hex("00000000").is_err());
    }

    #[test]
    fn clean_round_trip() {
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..2_000 {
            let frame = arbitrary_frame(&mut rng);
            let decoded = pulses_to_frame(&frame_to_pulses(&frame), DEFAULT_TOLERANCE);
            assert_eq!(decoded, DecodeResult::Decodable(frame));
        }
    }

    #[test]
    fn encoding_is_injective() {
        use std::collections::HashSet;
        let mut rng = StdRng::seed_from_u64(16);
        let mut seen = HashSet::new();
        let mut frames = HashSet::new();
        for _ in 0..5_000 {
            let frame = arbitrary_frame(&mut rng);
            if frames.insert((frame.user_id(), frame.filter())) {
                assert!(seen.insert(frame.payload_bits()), "payload collision for {frame}");
            }
        }
    }

    #[test]
    fn tolerance_boundaries() {
        let frame = IrFrame::new(0x00F0F0, DeviceTypeFilter::new(1, 2, 3).unwrap()).unwrap();
        // Stretch one zero-space by 24%: still decodes at the default 25%.
        let mut train = frame_to_pulses(&frame);
        let idx = 3; // first bit's space
        let nominal = train.segments[idx].duration.ticks();
        train.segments[idx].duration = SimDuration::from_ticks(nominal + nominal / 100 * 24);
        assert_eq!(pulses_to_frame(&train, DEFAULT_TOLERANCE), DecodeResult::Decodable(frame));

        // 26%: beyond tolerance, so the symbol is unclassifiable.
        train.segments[idx].duration = SimDuration::from_ticks(nominal + nominal / 100 * 26);
        assert_eq!(pulses_to_frame(&train, DEFAULT_TOLERANCE), DecodeResult::PartiallyDecodable);
    }

    #[test]
    fn lead_code_damage_is_undetectable() {
        let frame = IrFrame::new(0x123456, DeviceTypeFilter::WILDCARD).unwrap();
        let mut train = frame_to_pulses(&frame);
        train.segments[0].duration = SimDuration::from_us(4_500); // half the lead mark
        assert_eq!(pulses_to_frame(&train, DEFAULT_TOLERANCE), DecodeResult::Undetectable);

        assert_eq!(
            pulses_to_frame(&PulseTrain::default(), DEFAULT_TOLERANCE),
            DecodeResult::Undetectable
        );
    }

    #[test]
    fn truncation_after_lead_is_partial() {
        let frame = IrFrame::new(0x123456, DeviceTypeFilter::WILDCARD).unwrap();
        let mut train = frame_to_pulses(&frame);
        train.segments.truncate(30);
        assert_eq!(pulses_to_frame(&train, DEFAULT_TOLERANCE), DecodeResult::PartiallyDecodable);
    }

    #[test]
    fn bit_value_flip_fails_parity() {
        // Turning a zero space into a (valid) one space flips a payload bit;
        // parity must reject the reassembled word.
        let frame = IrFrame::new(0, DeviceTypeFilter::WILDCARD).unwrap();
        let mut train = frame_to_pulses(&frame);
        train.segments[3].duration = ONE_SPACE;
        assert_eq!(pulses_to_frame(&train, DEFAULT_TOLERANCE), DecodeResult::PartiallyDecodable);
    }

    #[test]
    #[should_panic(expected = "tolerance")]
    fn tolerance_out_of_range_panics() {
        let frame = IrFrame::new(0, DeviceTypeFilter::WILDCARD).unwrap();
        let _ = pulses_to_frame(&frame_to_pulses(&frame), 0.5);
    }
}
