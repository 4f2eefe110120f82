//! Trajectory tracking: lookahead waypoint, proportional turn-rate
//! correction, and conversion to a curvature command through the inverse
//! reduction map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{kappa_of_omega, GaitError, ReductionMap};
use crate::kinematics::{pose_error, propagate, Pose, PoseError, VelocityCommand};
use crate::planner::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("invalid tracking settings: {0}")]
    InvalidConfig(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error(transparent)]
    Map(#[from] GaitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// Lookahead ball radius (m).
    pub waypoint_radius_delta: f64,
    pub replan_cycles: usize,
    /// rad/s per rad of heading error.
    pub k_heading: f64,
    /// rad/s per m of cross-track error.
    pub k_cross: f64,
    /// Certified path kept in reserve: the robot stops once the next cycle
    /// would leave less than this ahead (m).
    pub stop_margin: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            waypoint_radius_delta: 0.06,
            replan_cycles: 4,
            k_heading: 0.2,
            k_cross: 0.5,
            stop_margin: 0.03,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.waypoint_radius_delta > 0.0) {
            return Err(ControlError::InvalidConfig("delta must be positive".into()));
        }
        if self.replan_cycles == 0 {
            return Err(ControlError::InvalidConfig(
                "replan_cycles must be positive".into(),
            ));
        }
        if !(self.stop_margin >= 0.0 && self.stop_margin.is_finite()) {
            return Err(ControlError::InvalidConfig(
                "stop_margin must be >= 0".into(),
            ));
        }
        if !(self.k_heading >= 0.0 && self.k_cross >= 0.0) {
            return Err(ControlError::InvalidConfig(
                "gains must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub omega_ff: f64,
    pub omega_fb: f64,
    pub kappa_cmd: f64,
    pub saturated: bool,
    pub target_index: usize,
}

/// Furthest pose (by index) within `delta` of `pose_est`, else the nearest.
pub fn pick_target_waypoint(pose_est: &Pose, traj: &Trajectory, delta: f64) -> Option<usize> {
    if traj.poses.is_empty() {
        return None;
    }
    let within = traj
        .poses
        .iter()
        .rposition(|p| p.distance_to(pose_est) <= delta);
    within.or_else(|| Some(nearest_index(pose_est, traj)))
}

fn nearest_index(pose: &Pose, traj: &Trajectory) -> usize {
    traj.poses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance_to(pose).total_cmp(&b.1.distance_to(pose)))
        .map_or(0, |(i, _)| i)
}

pub fn feedback_omega(err: &PoseError, cfg: &TrackingConfig) -> f64 {
    cfg.k_heading * err.heading + cfg.k_cross * err.cross
}

pub fn control_step(
    pose_est: &Pose,
    traj: &Trajectory,
    map: &ReductionMap,
    cfg: &TrackingConfig,
    kappa_max: f64,
) -> Result<ControlOutput, ControlError> {
    let target_index = pick_target_waypoint(pose_est, traj, cfg.waypoint_radius_delta)
        .ok_or(ControlError::EmptyTrajectory)?;
    let omega_ff = map.omega_of_kappa(traj.kappa);
    // compare the target with where the feedforward arc alone would take the
    // robot over the same arclength, so a robot on the path sees no error
    let nearest = nearest_index(pose_est, traj);
    let ahead = target_index.saturating_sub(nearest) as f64 * traj.sample_spacing;
    let expected = propagate(
        pose_est,
        VelocityCommand::new(map.v_forward, omega_ff),
        ahead / map.v_forward,
    );
    let err = pose_error(&expected, &traj.poses[target_index]);
    let omega_fb = feedback_omega(&err, cfg);
    let cmd = kappa_of_omega(map, omega_ff + omega_fb, kappa_max)?;
    Ok(ControlOutput {
        omega_ff,
        omega_fb,
        kappa_cmd: cmd.kappa,
        saturated: cmd.saturated,
        target_index,
    })
}
