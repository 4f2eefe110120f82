//! Pose estimation with a motion prior.
//!
//! Frame-to-frame visual tracking is simulated: it reports the true
//! inter-frame displacement with its translation multiplied by the tracker's
//! scale (which drifts multiplicatively every cycle) plus Gaussian noise.
//! The estimator predicts each step with the reduced unicycle, accepts an
//! observation only when it agrees with the prediction, and pulls the
//! tracker scale back toward the prediction on every accepted step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::ReductionMap;
use crate::kinematics::{arc_delta, normalize_angle, propagate, Pose, VelocityCommand};

#[derive(Debug, Error, PartialEq)]
pub enum LocalizationError {
    #[error("known-motion initialization needs a nonzero baseline")]
    ZeroBaseline,
    #[error("invalid localization settings: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose,
    /// Tracker scale: observed translation per metre of true translation.
    pub scale: f64,
    pub cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryObservation {
    /// Body-frame displacement between consecutive frames.
    pub delta: Pose,
}

/// Synthetic tracker noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryNoise {
    /// Per-axis translation sigma as a fraction of the true step length.
    pub translation_sigma_ratio: f64,
    /// Rotation sigma (rad).
    pub rotation_sigma: f64,
    /// Median of the lognormal per-cycle scale multiplier.
    pub drift_median: f64,
    /// Log-space sigma of the per-cycle scale multiplier.
    pub drift_log_sigma: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            translation_sigma_ratio: 0.05,
            rotation_sigma: 0.01,
            drift_median: 1.001,
            drift_log_sigma: 0.001,
        }
    }
}

impl OdometryNoise {
    pub fn noiseless() -> Self {
        Self {
            translation_sigma_ratio: 0.0,
            rotation_sigma: 0.0,
            drift_median: 1.0,
            drift_log_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LocalizationError> {
        let ok = self.translation_sigma_ratio >= 0.0
            && self.rotation_sigma >= 0.0
            && self.drift_median > 0.0
            && self.drift_log_sigma >= 0.0
            && [
                self.translation_sigma_ratio,
                self.rotation_sigma,
                self.drift_median,
                self.drift_log_sigma,
            ]
            .iter()
            .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(LocalizationError::InvalidConfig(format!(
                "bad noise {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingConfig {
    /// Maximum translation disagreement with the prediction (m).
    pub translation_gate: f64,
    /// Maximum rotation disagreement with the prediction (rad).
    pub rotation_gate: f64,
    /// Blend weight of the observation in the fused displacement.
    pub fusion_weight: f64,
    /// Fraction (in log space) of the observed scale error removed per
    /// accepted step.
    pub scale_gain: f64,
    /// When false every observation is used as-is (plain odometry).
    pub gating: bool,
}

impl GatingConfig {
    /// Gates at `sigmas` standard deviations of `noise` for a step of
    /// `nominal_step` metres.
    pub fn from_noise(noise: &OdometryNoise, nominal_step: f64, sigmas: f64) -> Self {
        Self {
            translation_gate: sigmas * noise.translation_sigma_ratio * nominal_step,
            rotation_gate: sigmas * noise.rotation_sigma,
            fusion_weight: 0.7,
            scale_gain: 0.1,
            gating: true,
        }
    }

    pub fn validate(&self) -> Result<(), LocalizationError> {
        if !(self.translation_gate > 0.0 && self.rotation_gate > 0.0) {
            return Err(LocalizationError::InvalidConfig(
                "gates must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.fusion_weight) || !(0.0..=1.0).contains(&self.scale_gain) {
            return Err(LocalizationError::InvalidConfig(
                "fusion weight and scale gain must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Anchors the estimate at `start` after a programmed motion of known size.
pub fn initialize_known_motion(
    start: Pose,
    true_delta: &Pose,
) -> Result<PoseEstimate, LocalizationError> {
    if true_delta.x.hypot(true_delta.y) <= 0.0 {
        return Err(LocalizationError::ZeroBaseline);
    }
    Ok(PoseEstimate {
        pose: start,
        scale: 1.0,
        cycle: 0,
    })
}

pub fn predict(est: &PoseEstimate, kappa_cmd: f64, map: &ReductionMap, dt: f64) -> PoseEstimate {
    let cmd = VelocityCommand::new(map.v_forward, map.omega_of_kappa(kappa_cmd));
    predict_command(est, cmd, dt)
}

pub fn predict_command(est: &PoseEstimate, cmd: VelocityCommand, dt: f64) -> PoseEstimate {
    PoseEstimate {
        pose: propagate(&est.pose, cmd, dt),
        scale: est.scale,
        cycle: est.cycle + 1,
    }
}

/// Advances `est` over one interval using the observation when it passes
/// the gates, the prediction alone otherwise.
pub fn gate_and_fuse(
    est: &PoseEstimate,
    obs: &OdometryObservation,
    predicted_delta: &Pose,
    cfg: &GatingConfig,
) -> (PoseEstimate, bool) {
    let advance = |delta: &Pose, scale: f64| PoseEstimate {
        pose: est.pose.compose(delta),
        scale,
        cycle: est.cycle + 1,
    };
    if !cfg.gating {
        return (advance(&obs.delta, est.scale), true);
    }
    let dx = obs.delta.x - predicted_delta.x;
    let dy = obs.delta.y - predicted_delta.y;
    let dtheta = normalize_angle(obs.delta.theta - predicted_delta.theta);
    let accepted = dx.hypot(dy) <= cfg.translation_gate && dtheta.abs() <= cfg.rotation_gate;
    if !accepted {
        return (advance(predicted_delta, est.scale), false);
    }
    let observed = obs.delta.x.hypot(obs.delta.y);
    let predicted = predicted_delta.x.hypot(predicted_delta.y);
    let correction = if observed > 0.0 && predicted > 0.0 {
        (predicted / observed).powf(cfg.scale_gain)
    } else {
        1.0
    };
    let w = cfg.fusion_weight;
    let (cx, cy) = (obs.delta.x * correction, obs.delta.y * correction);
    let fused = Pose::new(
        predicted_delta.x + w * (cx - predicted_delta.x),
        predicted_delta.y + w * (cy - predicted_delta.y),
        predicted_delta.theta + w * dtheta,
    );
    (advance(&fused, est.scale * correction), true)
}

/// Seeded stand-in for the frame-to-frame tracker.
#[derive(Debug, Clone)]
pub struct OdometrySimulator {
    pub noise: OdometryNoise,
    rng: ChaCha8Rng,
}

impl OdometrySimulator {
    pub fn new(noise: OdometryNoise, seed: u64) -> Self {
        Self::from_rng(noise, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(noise: OdometryNoise, rng: ChaCha8Rng) -> Self {
        Self { noise, rng }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One cycle of multiplicative scale drift.
    pub fn drift(&mut self, scale: f64) -> f64 {
        let z = self.normal();
        scale * (self.noise.drift_median.ln() + self.noise.drift_log_sigma * z).exp()
    }

    /// Tracker report of `true_delta` at tracker scale `scale`.
    pub fn observe(&mut self, true_delta: &Pose, scale: f64) -> OdometryObservation {
        let step = true_delta.x.hypot(true_delta.y);
        let sigma_t = self.noise.translation_sigma_ratio * step;
        let (zx, zy, zr) = (self.normal(), self.normal(), self.normal());
        OdometryObservation {
            delta: Pose::new(
                scale * true_delta.x + sigma_t * zx,
                scale * true_delta.y + sigma_t * zy,
                true_delta.theta + self.noise.rotation_sigma * zr,
            ),
        }
    }
}

/// Outcome of [`run_straight_tracking`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRun {
    pub final_scale: f64,
    pub accepted: usize,
    pub final_position_error: f64,
}

/// Open-loop drift experiment: the robot holds `kappa` for `cycles` gait
/// cycles while the estimator tracks it from simulated odometry.
pub fn run_straight_tracking(
    map: &ReductionMap,
    kappa: f64,
    cycles: usize,
    dt: f64,
    noise: OdometryNoise,
    cfg: &GatingConfig,
    seed: u64,
) -> DriftRun {
    let cmd = VelocityCommand::new(map.v_forward, map.omega_of_kappa(kappa));
    let delta = arc_delta(cmd, dt);
    let mut truth = Pose::identity();
    let mut est = initialize_known_motion(truth, &delta).expect("moving command");
    let mut sim = OdometrySimulator::new(noise, seed);
    let mut accepted = 0;
    for _ in 0..cycles {
        truth = truth.compose(&delta);
        est.scale = sim.drift(est.scale);
        let obs = sim.observe(&delta, est.scale);
        let (next, ok) = gate_and_fuse(&est, &obs, &delta, cfg);
        accepted += ok as usize;
        est = next;
    }
    DriftRun {
        final_scale: est.scale,
        accepted,
        final_position_error: est.pose.distance_to(&truth),
    }
}
