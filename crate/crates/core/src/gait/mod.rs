//! Traveling-wave rectilinear gait: body shape, ground contact, activation,
//! multi-link dynamics and the unicycle reduction fitted from parameter
//! sweeps.
//!
//! The average body is a constant-curvature arc parametrized by arclength
//! `s` in `[-L/2, L/2]` with the body frame at `s = 0`, tangent along `+x`.
//! A vertical wave `z(s, t) = A sin(2 pi (f t + s / lambda))` lifts parts of
//! the body off the ground; the remainder is in contact.

mod dynamics;
mod reduction;
mod sweep;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{
    average_body_velocity, average_body_velocity_with, body_forces, step_dynamics,
    step_dynamics_with, ContactModel, GaitState, LinkChain, SimSettings,
};
pub use reduction::{fit_reduction, kappa_of_omega, KappaCommand, ReductionMap};
pub use sweep::{sweep_parameters, sweep_parameters_with, SweepPoint, SweepResult};

/// Curvatures below this magnitude use the straight-body limit.
pub const STRAIGHT_CURVATURE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GaitError {
    #[error("invalid gait parameters: {0}")]
    InvalidParams(String),
    #[error("invalid friction coefficients: {0}")]
    InvalidFriction(String),
    #[error("integration step {dt} s outside (0, {max}] s")]
    StepOutOfRange { dt: f64, max: f64 },
    #[error("cycle counts must be positive (settle {settle}, average {average})")]
    InvalidCycles { settle: usize, average: usize },
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("curvature grid is not symmetric about zero")]
    AsymmetricGrid,
    #[error("sweep point (A = {amplitude}, kappa = {kappa}) failed: {source}")]
    GridPoint {
        amplitude: f64,
        kappa: f64,
        #[source]
        source: Box<GaitError>,
    },
    #[error("reduction fit needs at least 3 distinct curvatures, got {0}")]
    TooFewCurvatures(usize),
    #[error("degenerate reduction fit: {0}")]
    DegenerateFit(String),
    #[error("reduction map has zero angular slope and cannot be inverted")]
    NonInvertibleMap,
    #[error("malformed reduction map: {0}")]
    MalformedMap(String),
}

/// Traveling-wave parameters and body geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitParams {
    /// Lift amplitude A (m).
    pub amplitude: f64,
    /// Wavelength lambda (m).
    pub wavelength: f64,
    /// Wave frequency f (cycles/s).
    pub frequency: f64,
    /// Curvature kappa of the average body (1/m).
    pub curvature: f64,
    /// Body length L (m).
    pub body_length: f64,
    pub link_count: usize,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            wavelength: 0.12,
            frequency: 0.4,
            curvature: 0.0,
            body_length: 0.72,
            link_count: 12,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<(), GaitError> {
        let bad = |msg: String| Err(GaitError::InvalidParams(msg));
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude {} must be >= 0", self.amplitude));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad(format!("wavelength {} must be > 0", self.wavelength));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return bad(format!("frequency {} must be > 0", self.frequency));
        }
        if !(self.body_length > 0.0 && self.body_length.is_finite()) {
            return bad(format!("body length {} must be > 0", self.body_length));
        }
        if self.link_count < 2 {
            return bad(format!("link count {} must be >= 2", self.link_count));
        }
        if !self.curvature.is_finite() || self.curvature.abs() * self.body_length >= TAU {
            return bad(format!(
                "curvature {} wraps a body of length {} past a full circle",
                self.curvature, self.body_length
            ));
        }
        Ok(())
    }

    /// Duration of one gait cycle (s).
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn with_curvature(mut self, curvature: f64) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.body_length
    }
}

/// Viscous friction coefficients, per unit normal load and unit slip speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionCoefficients {
    /// Resistance to backward sliding along the body tangent.
    pub mu_b: f64,
    /// Resistance to forward sliding along the body tangent.
    pub mu_f: f64,
    /// Resistance to sliding across the body.
    pub mu_t: f64,
}

impl Default for FrictionCoefficients {
    fn default() -> Self {
        Self {
            mu_b: 0.3,
            mu_f: 0.1,
            mu_t: 0.5,
        }
    }
}

impl FrictionCoefficients {
    pub fn validate(&self) -> Result<(), GaitError> {
        let all = [self.mu_b, self.mu_f, self.mu_t];
        if all.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(GaitError::InvalidFriction(format!(
                "coefficients must be finite and non-negative: {all:?}"
            )));
        }
        if all.iter().all(|m| *m == 0.0) {
            return Err(GaitError::InvalidFriction(
                "at least one coefficient must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Body-frame twist: forward and lateral speed (m/s) and turn rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub xi_x: f64,
    pub xi_y: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub fn new(xi_x: f64, xi_y: f64, omega: f64) -> Self {
        Self { xi_x, xi_y, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.xi_x.is_finite() && self.xi_y.is_finite() && self.omega.is_finite()
    }
}

/// Point on the average body curve at arclength `s`.
pub fn body_curve(s: f64, kappa: f64) -> [f64; 2] {
    if kappa.abs() < STRAIGHT_CURVATURE {
        [s, 0.0]
    } else {
        let (sin, cos) = (kappa * s).sin_cos();
        [sin / kappa, (cos - 1.0) / kappa]
    }
}

/// Unit tangent of the average body curve at `s`.
pub fn body_tangent(s: f64, kappa: f64) -> [f64; 2] {
    if kappa.abs() < STRAIGHT_CURVATURE {
        [1.0, 0.0]
    } else {
        let (sin, cos) = (kappa * s).sin_cos();
        [cos, -sin]
    }
}

/// Vertical lift of the body at arclength `s` and time `t`.
pub fn lift_height(s: f64, t: f64, params: &GaitParams) -> f64 {
    params.amplitude * (TAU * (params.frequency * t + s / params.wavelength)).sin()
}

/// Arclength intervals of the body in ground contact at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactProfile {
    pub intervals: Vec<(f64, f64)>,
}

impl ContactProfile {
    pub fn contains(&self, s: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| s >= a && s <= b)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Contact set `{ s : |z(s, t)| <= threshold }` over the body.
///
/// The body touches down where the wave crosses its mean height; a positive
/// threshold widens each crossing into a finite patch.
pub fn contact_profile(t: f64, params: &GaitParams, threshold: f64) -> ContactProfile {
    let half = params.half_length();
    let amp = params.amplitude;
    if amp <= threshold || amp == 0.0 {
        return ContactProfile {
            intervals: vec![(-half, half)],
        };
    }
    // |sin(phase)| <= h/A  <=>  phase within asin(h/A) of a multiple of pi
    let width = (threshold / amp).asin();
    let phase_of = |s: f64| TAU * (params.frequency * t + s / params.wavelength);
    let s_of = |phase: f64| (phase / TAU - params.frequency * t) * params.wavelength;
    let lo_phase = phase_of(-half);
    let hi_phase = phase_of(half);
    let first = ((lo_phase - width) / PI).ceil() as i64;
    let last = ((hi_phase + width) / PI).floor() as i64;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for k in first..=last {
        let center = k as f64 * PI;
        let a = s_of(center - width).max(-half);
        let b = s_of(center + width).min(half);
        if a > b {
            continue;
        }
        match intervals.last_mut() {
            Some(prev) if a <= prev.1 => prev.1 = prev.1.max(b),
            _ => intervals.push((a, b)),
        }
    }
    ContactProfile { intervals }
}

/// Joint-centered pulses where the body can roll and curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub pulse_centers: Vec<f64>,
    pub pulse_width: f64,
}

impl ActivationProfile {
    /// One pulse per joint of `link_lengths`, laid out from `-L/2`.
    pub fn at_joints(link_lengths: &[f64], pulse_width: f64) -> Self {
        let total: f64 = link_lengths.iter().sum();
        let mut s = -0.5 * total;
        let mut pulse_centers = Vec::with_capacity(link_lengths.len().saturating_sub(1));
        for len in &link_lengths[..link_lengths.len().saturating_sub(1)] {
            s += len;
            pulse_centers.push(s);
        }
        Self {
            pulse_centers,
            pulse_width,
        }
    }

    /// Closed pulse intervals `[c - w/2, c + w/2]`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let hw = 0.5 * self.pulse_width;
        self.pulse_centers.iter().map(move |&c| (c - hw, c + hw))
    }
}

/// Activation indicator; pulse boundaries count as active.
pub fn activation(s: f64, profile: &ActivationProfile) -> bool {
    let hw = 0.5 * profile.pulse_width;
    profile.pulse_centers.iter().any(|&c| (s - c).abs() <= hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn body_curve_at_origin_and_straight_limit() {
        assert_eq!(body_curve(0.0, 2.0), [0.0, 0.0]);
        assert_eq!(body_curve(0.3, 0.0), [0.3, 0.0]);
        assert_eq!(body_curve(0.3, 1e-12), [0.3, 0.0]);
    }

    #[test]
    fn body_curve_matches_series_oracle() {
        // Taylor series of sin(ks)/k and (cos(ks)-1)/k summed to 30 terms
        // in f64; terms shrink fast enough that truncation is below 1e-17.
        let (s, k) = (0.3f64, 1.5f64);
        let u = k * s;
        let mut sin_series = 0.0f64;
        let mut cos_m1_series = 0.0f64;
        let mut term = u; // u^(2n+1)/(2n+1)!
        for n in 0..30 {
            sin_series += term;
            term *= -u * u / (((2 * n + 2) * (2 * n + 3)) as f64);
        }
        let mut term = -u * u / 2.0; // -u^2/2!
        for n in 1..30 {
            cos_m1_series += term;
            term *= -u * u / (((2 * n + 1) * (2 * n + 2)) as f64);
        }
        let p = body_curve(s, k);
        assert_abs_diff_eq!(p[0], sin_series / k, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], cos_m1_series / k, epsilon = 1e-15);
        // 40-digit evaluation: 0.28997702274082014028..., -0.06636859843154871888...
        assert_abs_diff_eq!(p[0], 0.289_977_022_740_820_14, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], -0.066_368_598_431_548_72, epsilon = 1e-15);
    }

    #[test]
    fn lift_height_examples() {
        let p = GaitParams::default();
        assert_eq!(lift_height(0.0, 0.0, &p), 0.0);
        let at_quarter = lift_height(p.wavelength / 4.0, 0.0, &p);
        assert_abs_diff_eq!(at_quarter, 0.01, epsilon = 1e-15);
        let s = 0.17;
        let t = 1.3;
        assert_abs_diff_eq!(
            lift_height(s, t + p.period(), &p),
            lift_height(s, t, &p),
            epsilon = 1e-15
        );
    }

    #[test]
    fn contact_is_whole_body_without_wave() {
        let p = GaitParams::default().with_amplitude(0.0);
        let c = contact_profile(0.7, &p, 0.0);
        assert_eq!(c.intervals, vec![(-0.36, 0.36)]);
        let p = GaitParams::default();
        let c = contact_profile(0.7, &p, p.amplitude);
        assert_eq!(c.intervals, vec![(-0.36, 0.36)]);
    }

    #[test]
    fn zero_threshold_gives_point_contacts_at_zero_crossings() {
        let p = GaitParams {
            amplitude: 0.01,
            wavelength: 0.36,
            ..GaitParams::default()
        };
        let c = contact_profile(0.0, &p, 0.0);
        assert!(c.measure() < 1e-12);
        // crossings every half wavelength from -L/2 to L/2 inclusive
        assert_eq!(c.intervals.len(), 5);
        for (a, _) in &c.intervals {
            assert!((TAU * a / p.wavelength).sin().abs() < 1e-12);
        }
    }

    #[test]
    fn contact_matches_dense_sampling() {
        let p = GaitParams {
            amplitude: 0.01,
            wavelength: 0.36,
            ..GaitParams::default()
        };
        let h = 0.001;
        for &t in &[0.0, 0.37, 1.1, 2.49] {
            let c = contact_profile(t, &p, h);
            let n = 10_000;
            for i in 0..=n {
                let s = -0.36 + 0.72 * i as f64 / n as f64;
                let z = lift_height(s, t, &p).abs();
                // skip samples within rounding distance of a patch edge
                if (z - h).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(c.contains(s), z <= h, "t={t} s={s} z={z}");
            }
        }
    }

    #[test]
    fn activation_boundaries_are_closed() {
        let prof = ActivationProfile {
            pulse_centers: vec![-0.1, 0.1],
            pulse_width: 0.02,
        };
        assert!(activation(0.1, &prof));
        assert!(!activation(0.0, &prof));
        assert!(activation(-0.1 + 0.01, &prof));
        assert!(!activation(-0.1 + 0.0101, &prof));
    }

    #[test]
    fn activation_pulses_sit_on_joints() {
        let prof = ActivationProfile::at_joints(&[0.06; 12], 0.015);
        assert_eq!(prof.pulse_centers.len(), 11);
        assert_abs_diff_eq!(prof.pulse_centers[0], -0.30, epsilon = 1e-12);
        assert_abs_diff_eq!(prof.pulse_centers[10], 0.30, epsilon = 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(GaitParams::default().validate().is_ok());
        assert!(GaitParams::default()
            .with_amplitude(-0.1)
            .validate()
            .is_err());
        assert!(GaitParams::default()
            .with_curvature(9.0)
            .validate()
            .is_err());
        let p = GaitParams {
            link_count: 1,
            ..GaitParams::default()
        };
        assert!(p.validate().is_err());
        assert!(FrictionCoefficients::default().validate().is_ok());
        let zero = FrictionCoefficients {
            mu_b: 0.0,
            mu_f: 0.0,
            mu_t: 0.0,
        };
        assert!(zero.validate().is_err());
    }

    proptest! {
        #[test]
        fn lift_bounded_and_periodic(s in -0.36..0.36f64, t in 0.0..100.0f64,
                                     a in 0.0..0.05f64) {
            let p = GaitParams::default().with_amplitude(a);
            let z = lift_height(s, t, &p);
            prop_assert!(z.abs() <= a + 1e-15);
            prop_assert!((lift_height(s, t + p.period(), &p) - z).abs() < 1e-12);
        }

        #[test]
        fn contact_intervals_ordered_and_nonempty(t in 0.0..10.0f64, a in 1e-4..0.05f64,
                                                  ratio in 0.0..1.0f64) {
            let p = GaitParams::default().with_amplitude(a);
            let c = contact_profile(t, &p, ratio * a);
            prop_assert!(!c.intervals.is_empty());
            for w in c.intervals.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
            for &(lo, hi) in &c.intervals {
                prop_assert!(lo <= hi && lo >= -0.36 && hi <= 0.36);
            }
        }
    }
}
