//! Parametric IR channel model.
//!
//! Reception quality is a function of emitter-receiver geometry: distance,
//! emitter off-axis angle θ, and receiver facing angle φ. Decode probability
//! is 1 inside the distance-dependent cone half-angle α(d), ramps linearly to
//! 0 at 2α(d), and is 0 beyond the profile's range cap. The receiver angle is
//! irrelevant up to ±60°, ramps off between 60° and 90°, and kills the link
//! past ±90°. Non-decodable outcomes split between PARTIAL and UNDETECT by a
//! configurable share, and both are realized as concrete pulse-train damage
//! so the receiver's classification comes from the real decoder, not a flag.

use rand::Rng;
use thiserror::Error;

use crate::ir_codec::{PulseTrain, FRAME_SEGMENTS};
use crate::time::SimDuration;

/// Space duration used to deform one symbol of a PARTIAL train: the midpoint
/// of the zero and one spaces (1125 µs), unclassifiable at the default 25%
/// tolerance from either nominal.
pub const AMBIGUOUS_SPACE: SimDuration = SimDuration::from_half_us(2_250);

/// Receiver angle below which facing has no effect.
const RX_FLAT_DEG: f64 = 60.0;
/// Receiver angle beyond which nothing is detected.
const RX_CUTOFF_DEG: f64 = 90.0;

#[derive(Debug, Error, PartialEq)]
pub enum IrLinkError {
    #[error("distance must be finite and non-negative, got {0}")]
    BadDistance(f64),
    #[error("angle must lie in [-180, 180], got {0}")]
    BadAngle(f64),
    #[error("alpha table invalid: {0}")]
    BadAlphaTable(String),
    #[error("partial share must lie in [0, 1], got {0}")]
    BadPartialShare(f64),
}

/// Emitter-receiver geometry for one IR emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrGeometry {
    distance_m: f64,
    tx_angle_deg: f64,
    rx_angle_deg: f64,
}

impl IrGeometry {
    pub fn new(distance_m: f64, tx_angle_deg: f64, rx_angle_deg: f64) -> Result<Self, IrLinkError> {
        if !distance_m.is_finite() || distance_m < 0.0 {
            return Err(IrLinkError::BadDistance(distance_m));
        }
        for angle in [tx_angle_deg, rx_angle_deg] {
            if !angle.is_finite() || !(-180.0..=180.0).contains(&angle) {
                return Err(IrLinkError::BadAngle(angle));
            }
        }
        Ok(IrGeometry { distance_m, tx_angle_deg, rx_angle_deg })
    }

    #[must_use]
    pub const fn distance_m(self) -> f64 {
        self.distance_m
    }

    #[must_use]
    pub const fn tx_angle_deg(self) -> f64 {
        self.tx_angle_deg
    }

    #[must_use]
    pub const fn rx_angle_deg(self) -> f64 {
        self.rx_angle_deg
    }
}

/// Environment profile: range cap plus the cone half-angle table.
#[derive(Debug, Clone, PartialEq)]
pub struct IrEnvironment {
    max_range_m: f64,
    /// (distance m, cone half-angle deg), ascending distance, non-increasing
    /// angle. Queries interpolate linearly and clamp at both ends.
    alpha_table: Vec<(f64, f64)>,
    partial_share: f64,
}

impl IrEnvironment {
    /// Indoor profile: reliable out to 5 m with the cone narrowing from 25°
    /// at 1 m to 10° at 5 m.
    #[must_use]
    pub fn indoor() -> Self {
        IrEnvironment::new(5.0, vec![(1.0, 25.0), (3.0, 15.0), (5.0, 10.0)], 0.5)
            .expect("indoor profile is valid")
    }

    /// Shaded outdoor profile: ambient IR limits range to 2.5 m; the cone
    /// table matches indoor inside that range.
    #[must_use]
    pub fn outdoor_shaded() -> Self {
        IrEnvironment::new(2.5, vec![(1.0, 25.0), (3.0, 15.0), (5.0, 10.0)], 0.5)
            .expect("outdoor profile is valid")
    }

    pub fn new(
        max_range_m: f64,
        alpha_table: Vec<(f64, f64)>,
        partial_share: f64,
    ) -> Result<Self, IrLinkError> {
        if !max_range_m.is_finite() || max_range_m <= 0.0 {
            return Err(IrLinkError::BadAlphaTable(format!("max range {max_range_m} not positive")));
        }
        if alpha_table.is_empty() {
            return Err(IrLinkError::BadAlphaTable("empty table".into()));
        }
        for window in alpha_table.windows(2) {
            let ((d0, a0), (d1, a1)) = (window[0], window[1]);
            if d1 <= d0 {
                return Err(IrLinkError::BadAlphaTable(format!(
                    "distances must ascend, {d1} after {d0}"
                )));
            }
            if a1 > a0 {
                return Err(IrLinkError::BadAlphaTable(format!(
                    "half-angle must not grow with distance, {a1}° at {d1} m after {a0}° at {d0} m"
                )));
            }
        }
        for &(d, a) in &alpha_table {
            if !d.is_finite() || d < 0.0 || !a.is_finite() || a <= 0.0 || a > 180.0 {
                return Err(IrLinkError::BadAlphaTable(format!("bad entry ({d} m, {a}°)")));
            }
        }
        if !(0.0..=1.0).contains(&partial_share) {
            return Err(IrLinkError::BadPartialShare(partial_share));
        }
        Ok(IrEnvironment { max_range_m, alpha_table, partial_share })
    }

    #[must_use]
    pub const fn max_range_m(&self) -> f64 {
        self.max_range_m
    }

    /// Cone half-angle at `distance_m`: linear between table knots, clamped
    /// to the first/last entries outside them. Non-increasing in distance.
    #[must_use]
    pub fn cone_half_angle_deg(&self, distance_m: f64) -> f64 {
        let table = &self.alpha_table;
        if distance_m <= table[0].0 {
            return table[0].1;
        }
        for window in table.windows(2) {
            let ((d0, a0), (d1, a1)) = (window[0], window[1]);
            if distance_m <= d1 {
                let t = (distance_m - d0) / (d1 - d0);
                return a0 + t * (a1 - a0);
            }
        }
        table[table.len() - 1].1
    }
}

/// Link-level classification of one emission at one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeClass {
    /// Pulse train arrives intact.
    Decode,
    /// Lead code arrives but at least one symbol is deformed.
    Partial,
    /// Nothing recognizable arrives.
    Undetect,
}

/// Decode and partial probabilities for a geometry under an environment.
/// The remaining mass is UNDETECT. `p_decode` is non-increasing in distance
/// and in |θ| and constant in φ up to ±60°.
#[must_use]
pub fn outcome_probabilities(geom: &IrGeometry, env: &IrEnvironment) -> (f64, f64) {
    if geom.distance_m > env.max_range_m {
        return (0.0, 0.0);
    }
    let phi = geom.rx_angle_deg.abs();
    if phi >= RX_CUTOFF_DEG {
        return (0.0, 0.0);
    }
    let rx_factor = if phi <= RX_FLAT_DEG {
        1.0
    } else {
        (RX_CUTOFF_DEG - phi) / (RX_CUTOFF_DEG - RX_FLAT_DEG)
    };
    let alpha = env.cone_half_angle_deg(geom.distance_m);
    let theta = geom.tx_angle_deg.abs();
    if theta >= 2.0 * alpha {
        return (0.0, 0.0);
    }
    let theta_factor = if theta <= alpha { 1.0 } else { 2.0 - theta / alpha };
    let p_decode = (theta_factor * rx_factor).clamp(0.0, 1.0);
    let p_partial = env.partial_share * (1.0 - p_decode);
    (p_decode, p_partial)
}

/// Draws an outcome class for one emission.
pub fn sample_outcome(geom: &IrGeometry, env: &IrEnvironment, rng: &mut impl Rng) -> OutcomeClass {
    let (p_decode, p_partial) = outcome_probabilities(geom, env);
    let u: f64 = rng.gen();
    if u < p_decode {
        OutcomeClass::Decode
    } else if u < p_decode + p_partial {
        OutcomeClass::Partial
    } else {
        OutcomeClass::Undetect
    }
}

/// Realizes an outcome as concrete waveform damage.
///
/// DECODE returns the train unchanged. PARTIAL keeps the lead code and
/// deforms one randomly chosen symbol space to [`AMBIGUOUS_SPACE`]. UNDETECT
/// halves the lead mark so the lead code is unrecognizable.
#[must_use]
pub fn apply_outcome(train: &PulseTrain, outcome: OutcomeClass, rng: &mut impl Rng) -> PulseTrain {
    let mut damaged = train.clone();
    match outcome {
        OutcomeClass::Decode => {}
        OutcomeClass::Partial => {
            debug_assert_eq!(damaged.segments.len(), FRAME_SEGMENTS);
            if damaged.segments.len() >= 4 {
                // Symbol spaces sit at odd indices 3, 5, ..., len-2.
                let symbols = (damaged.segments.len() - 3) / 2;
                let pick = 3 + 2 * rng.gen_range(0..symbols);
                damaged.segments[pick].duration = AMBIGUOUS_SPACE;
            }
        }
        OutcomeClass::Undetect => {
            if let Some(first) = damaged.segments.first_mut() {
                first.duration = SimDuration::from_ticks(first.duration.ticks() / 2);
            }
        }
    }
    damaged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_filter::DeviceTypeFilter;
    use crate::ir_codec::{frame_to_pulses, pulses_to_frame, DecodeResult, IrFrame, DEFAULT_TOLERANCE};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn geom(d: f64, theta: f64, phi: f64) -> IrGeometry {
        IrGeometry::new(d, theta, phi).unwrap()
    }

    #[test]
    fn alpha_table_interpolates_and_clamps() {
        let env = IrEnvironment::indoor();
        assert_eq!(env.cone_half_angle_deg(1.0), 25.0);
        assert_eq!(env.cone_half_angle_deg(3.0), 15.0);
        assert_eq!(env.cone_half_angle_deg(5.0), 10.0);
        assert_eq!(env.cone_half_angle_deg(2.0), 20.0);
        assert_eq!(env.cone_half_angle_deg(4.0), 12.5);
        assert_eq!(env.cone_half_angle_deg(0.2), 25.0);
        assert_eq!(env.cone_half_angle_deg(9.0), 10.0);
    }

    #[test]
    fn in_cone_in_range_always_decodes() {
        let env = IrEnvironment::indoor();
        assert_eq!(outcome_probabilities(&geom(5.0, 0.0, 0.0), &env), (1.0, 0.0));
        assert_eq!(outcome_probabilities(&geom(5.0, 10.0, 0.0), &env), (1.0, 0.0));
        // Receiver facing is irrelevant out to 60 degrees.
        assert_eq!(outcome_probabilities(&geom(5.0, 0.0, 60.0), &env), (1.0, 0.0));
        assert_eq!(outcome_probabilities(&geom(5.0, 0.0, -60.0), &env), (1.0, 0.0));
    }

    #[test]
    fn ramp_midpoint_and_cutoff() {
        let env = IrEnvironment::indoor();
        // At 5 m the cone is 10 degrees; 15 degrees sits mid-ramp.
        let (p_d, p_p) = outcome_probabilities(&geom(5.0, 15.0, 0.0), &env);
        assert!((p_d - 0.5).abs() < 1e-12);
        assert!((p_p - 0.25).abs() < 1e-12);
        // At twice the cone angle, nothing arrives.
        assert_eq!(outcome_probabilities(&geom(5.0, 20.0, 0.0), &env), (0.0, 0.0));
        assert_eq!(outcome_probabilities(&geom(5.0, 170.0, 0.0), &env), (0.0, 0.0));
    }

    #[test]
    fn outdoor_range_cap() {
        let env = IrEnvironment::outdoor_shaded();
        assert_eq!(outcome_probabilities(&geom(3.0, 0.0, 0.0), &env), (0.0, 0.0));
        assert_eq!(outcome_probabilities(&geom(2.5, 0.0, 0.0), &env), (1.0, 0.0));
    }

    #[test]
    fn receiver_angle_cutoff() {
        let env = IrEnvironment::indoor();
        assert_eq!(outcome_probabilities(&geom(1.0, 0.0, 95.0), &env), (0.0, 0.0));
        assert_eq!(outcome_probabilities(&geom(1.0, 0.0, 180.0), &env), (0.0, 0.0));
        let (p_mid, _) = outcome_probabilities(&geom(1.0, 0.0, 75.0), &env);
        assert!((p_mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decode_probability_is_monotone() {
        let env = IrEnvironment::indoor();
        let mut last = f64::INFINITY;
        for step in 0..50 {
            let d = 0.5 + step as f64 * 0.12;
            let (p, _) = outcome_probabilities(&geom(d, 18.0, 0.0), &env);
            assert!(p <= last + 1e-12, "p_decode grew at distance {d}");
            last = p;
        }
        let mut last = f64::INFINITY;
        for step in 0..60 {
            let theta = step as f64;
            let (p, _) = outcome_probabilities(&geom(4.0, theta, 0.0), &env);
            assert!(p <= last + 1e-12, "p_decode grew at theta {theta}");
            last = p;
        }
    }

    #[test]
    fn probabilities_are_well_formed() {
        let env = IrEnvironment::indoor();
        for d in [0.1, 1.0, 2.7, 4.9, 5.0, 7.0] {
            for theta in [-180.0, -30.0, 0.0, 12.0, 29.0, 180.0] {
                for phi in [0.0, 59.0, 61.0, 89.0, 91.0] {
                    let (p_d, p_p) = outcome_probabilities(&geom(d, theta, phi), &env);
                    assert!((0.0..=1.0).contains(&p_d));
                    assert!((0.0..=1.0).contains(&p_p));
                    assert!(p_d + p_p <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_tracks_probabilities() {
        let env = IrEnvironment::indoor();
        let g = geom(5.0, 15.0, 0.0); // (0.5, 0.25, 0.25)
        let mut rng = StdRng::seed_from_u64(21);
        let mut counts = [0u32; 3];
        let n = 40_000;
        for _ in 0..n {
            match sample_outcome(&g, &env, &mut rng) {
                OutcomeClass::Decode => counts[0] += 1,
                OutcomeClass::Partial => counts[1] += 1,
                OutcomeClass::Undetect => counts[2] += 1,
            }
        }
        let freq = |c: u32| c as f64 / n as f64;
        assert!((freq(counts[0]) - 0.50).abs() < 0.01);
        assert!((freq(counts[1]) - 0.25).abs() < 0.01);
        assert!((freq(counts[2]) - 0.25).abs() < 0.01);
    }

    #[test]
    fn damage_classes_verified_through_decoder() {
        let mut rng = StdRng::seed_from_u64(22);
        let frame = IrFrame::new(0x5A5A5A, DeviceTypeFilter::new(2, 1, 1).unwrap()).unwrap();
        let clean = frame_to_pulses(&frame);
        for _ in 0..10_000 {
            let partial = apply_outcome(&clean, OutcomeClass::Partial, &mut rng);
            assert_eq!(pulses_to_frame(&partial, DEFAULT_TOLERANCE), DecodeResult::PartiallyDecodable);
        }
        for _ in 0..1_000 {
            let undetect = apply_outcome(&clean, OutcomeClass::Undetect, &mut rng);
            assert_eq!(pulses_to_frame(&undetect, DEFAULT_TOLERANCE), DecodeResult::Undetectable);
        }
        let intact = apply_outcome(&clean, OutcomeClass::Decode, &mut rng);
        assert_eq!(pulses_to_frame(&intact, DEFAULT_TOLERANCE), DecodeResult::Decodable(frame));
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(IrGeometry::new(-1.0, 0.0, 0.0).is_err());
        assert!(IrGeometry::new(1.0, 181.0, 0.0).is_err());
        assert!(IrGeometry::new(1.0, 0.0, -181.0).is_err());
        assert!(IrEnvironment::new(5.0, vec![], 0.5).is_err());
        assert!(IrEnvironment::new(5.0, vec![(1.0, 25.0), (1.0, 15.0)], 0.5).is_err());
        assert!(IrEnvironment::new(5.0, vec![(1.0, 15.0), (2.0, 25.0)], 0.5).is_err());
        assert!(IrEnvironment::new(5.0, vec![(1.0, 25.0)], 1.5).is_err());
    }
}
