//! Cycle-level episode simulation: one sensing, estimation and actuation
//! step per gait cycle, replanning on a fixed cadence, with ground-truth
//! collision and goal checks.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{control_step, ControlError, TrackingConfig};
use crate::format::sig9;
use crate::gait::{
    step_dynamics_with, FrictionCoefficients, GaitError, GaitParams, GaitState, ReductionMap,
    SimSettings,
};
use crate::kinematics::{arc_delta, propagate, Pose, VelocityCommand};
use crate::localization::{
    gate_and_fuse, initialize_known_motion, GatingConfig, LocalizationError, OdometryNoise,
    OdometrySimulator, PoseEstimate,
};
use crate::perception::{perceive, CameraModel, PerceptionError};
use crate::planner::{plan, PlanError, PlannerConfig, Trajectory};
use crate::scene::{check_collision, Scene};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Gait(#[from] GaitError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error("invalid episode settings: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// Unicycle propagation through the fitted reduction.
    #[default]
    Reduced,
    /// Link-chain gait dynamics integrated through every cycle.
    #[serde(alias = "high_fidelity")]
    HighFidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Per-block label flip probability.
    pub flip_probability: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub translation_sigma_ratio: f64,
    pub rotation_sigma: f64,
    pub drift_median: f64,
    pub drift_log_sigma: f64,
    /// Gate width in noise standard deviations.
    pub gate_sigmas: f64,
    pub fusion_weight: f64,
    pub scale_gain: f64,
    pub gating: bool,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        let noise = OdometryNoise::default();
        Self {
            translation_sigma_ratio: noise.translation_sigma_ratio,
            rotation_sigma: noise.rotation_sigma,
            drift_median: noise.drift_median,
            drift_log_sigma: noise.drift_log_sigma,
            gate_sigmas: 3.0,
            fusion_weight: 0.7,
            scale_gain: 0.1,
            gating: true,
        }
    }
}

impl LocalizationConfig {
    pub fn noiseless() -> Self {
        let n = OdometryNoise::noiseless();
        Self {
            translation_sigma_ratio: n.translation_sigma_ratio,
            rotation_sigma: n.rotation_sigma,
            drift_median: n.drift_median,
            drift_log_sigma: n.drift_log_sigma,
            ..Self::default()
        }
    }

    pub fn noise(&self) -> OdometryNoise {
        OdometryNoise {
            translation_sigma_ratio: self.translation_sigma_ratio,
            rotation_sigma: self.rotation_sigma,
            drift_median: self.drift_median,
            drift_log_sigma: self.drift_log_sigma,
        }
    }

    /// Gates sized for a step of `nominal_step` metres. Zero noise still
    /// gets a small positive gate so agreement is accepted.
    pub fn gating_config(&self, nominal_step: f64) -> GatingConfig {
        let mut g = GatingConfig::from_noise(&self.noise(), nominal_step, self.gate_sigmas);
        g.translation_gate = g.translation_gate.max(1e-9);
        g.rotation_gate = g.rotation_gate.max(1e-9);
        g.fusion_weight = self.fusion_weight;
        g.scale_gain = self.scale_gain;
        g.gating = self.gating;
        g
    }
}

/// Everything an episode needs besides the scene and the reduction map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub mode: SimMode,
    pub budget_cycles: usize,
    pub gait: GaitParams,
    pub friction: FrictionCoefficients,
    pub sim: SimSettings,
    pub camera: CameraModel,
    pub perception: PerceptionConfig,
    pub planner: PlannerConfig,
    pub controller: TrackingConfig,
    pub localization: LocalizationConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: SimMode::Reduced,
            budget_cycles: 400,
            gait: GaitParams::default(),
            friction: FrictionCoefficients::default(),
            sim: SimSettings::default(),
            camera: CameraModel::default(),
            perception: PerceptionConfig::default(),
            planner: PlannerConfig::default(),
            controller: TrackingConfig::default(),
            localization: LocalizationConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.gait.validate()?;
        self.friction.validate()?;
        self.camera.validate()?;
        self.planner.validate()?;
        self.controller.validate()?;
        self.localization.noise().validate()?;
        let p = self.perception.flip_probability;
        if !(0.0..0.5).contains(&p) {
            return Err(PerceptionError::InvalidFlipProbability(p).into());
        }
        if self.budget_cycles == 0 {
            return Err(WorldError::InvalidConfig("budget must be positive".into()));
        }
        if self.sim.steps_per_cycle < 50 {
            return Err(WorldError::InvalidConfig(
                "need at least 50 dynamics steps per cycle".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub commanded_kappa: f64,
    /// Gait phase in cycles, in `[0, 1)`.
    pub gait_phase: f64,
    pub cycle_index: usize,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self {
            pose,
            commanded_kappa: 0.0,
            gait_phase: 0.0,
            cycle_index: 0,
        }
    }
}

/// Reduced-mode advance over `dt` seconds at the commanded curvature.
pub fn step_cycle(
    state: &RobotState,
    map: &ReductionMap,
    gait: &GaitParams,
    dt: f64,
) -> RobotState {
    let cmd = VelocityCommand::new(map.v_forward, map.omega_of_kappa(state.commanded_kappa));
    RobotState {
        pose: propagate(&state.pose, cmd, dt),
        commanded_kappa: state.commanded_kappa,
        gait_phase: (state.gait_phase + gait.frequency * dt).rem_euclid(1.0),
        cycle_index: state.cycle_index + 1,
    }
}

/// Link-chain integrator carried across cycles for high-fidelity episodes.
#[derive(Debug, Clone)]
pub struct GaitIntegrator {
    pub state: GaitState,
    pub params: GaitParams,
    pub friction: FrictionCoefficients,
    pub settings: SimSettings,
    steps_done: usize,
}

impl GaitIntegrator {
    /// Starts from rest and runs `warmup_cycles` straight cycles.
    pub fn new(
        params: GaitParams,
        friction: FrictionCoefficients,
        settings: SimSettings,
        warmup_cycles: usize,
    ) -> Result<Self, GaitError> {
        params.validate()?;
        friction.validate()?;
        let mut me = Self {
            state: GaitState::at_rest(&params, Pose::identity()),
            params,
            friction,
            settings,
            steps_done: 0,
        };
        for _ in 0..warmup_cycles {
            me.cycle(0.0)?;
        }
        Ok(me)
    }

    /// One full gait cycle at curvature `kappa`; returns the body-frame
    /// displacement of the average body.
    pub fn cycle(&mut self, kappa: f64) -> Result<Pose, GaitError> {
        let params = self.params.with_curvature(kappa);
        let steps = self.settings.steps_per_cycle;
        let dt = params.period() / steps as f64;
        let start = self.state.pose;
        for _ in 0..steps {
            self.state = step_dynamics_with(
                &self.state,
                &params,
                &self.friction,
                &self.settings.contact,
                dt,
            )?;
            self.steps_done += 1;
            self.state.time = self.steps_done as f64 * dt;
        }
        Ok(start.between(&self.state.pose))
    }
}

/// High-fidelity advance: the robot pose moves by the simulated body
/// displacement of one cycle.
pub fn step_cycle_high_fidelity(
    state: &RobotState,
    integrator: &mut GaitIntegrator,
) -> Result<RobotState, GaitError> {
    let delta = integrator.cycle(state.commanded_kappa)?;
    Ok(RobotState {
        pose: state.pose.compose(&delta),
        commanded_kappa: state.commanded_kappa,
        gait_phase: state.gait_phase,
        cycle_index: state.cycle_index + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GoalReached,
    Collision,
    BudgetExhausted,
}

impl Termination {
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::GoalReached => 0,
            Termination::Collision => 2,
            Termination::BudgetExhausted => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Termination::GoalReached => "goal_reached",
            Termination::Collision => "collision",
            Termination::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub true_pose: Pose,
    pub est_pose: Pose,
    pub kappa_cmd: f64,
    pub omega_ff: f64,
    pub omega_fb: f64,
    /// Id of the trajectory being tracked, `-1` while stopped.
    pub traj_id: i64,
    pub collision: bool,
    pub replanned: bool,
    pub saturated: bool,
    pub observation_accepted: bool,
    pub scale: f64,
}

/// A replan: the poses it certified (estimate frame) and both robot poses
/// at planning time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvent {
    pub cycle: usize,
    pub traj_id: Option<i64>,
    pub true_pose: Pose,
    pub est_pose: Pose,
    pub certified: Vec<Pose>,
    pub selected: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub records: Vec<CycleRecord>,
    pub plans: Vec<PlanEvent>,
    pub termination: Termination,
}

impl EpisodeLog {
    pub const CSV_HEADER: &'static str =
        "cycle,x_true,y_true,theta_true,x_est,y_est,theta_est,kappa_cmd,omega_ff,omega_fb,traj_id,collision";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cycle,
                sig9(r.true_pose.x),
                sig9(r.true_pose.y),
                sig9(r.true_pose.theta),
                sig9(r.est_pose.x),
                sig9(r.est_pose.y),
                sig9(r.est_pose.theta),
                sig9(r.kappa_cmd),
                sig9(r.omega_ff),
                sig9(r.omega_fb),
                r.traj_id,
                r.collision as u8
            );
        }
        out
    }

    pub fn any_collision(&self) -> bool {
        self.records.iter().any(|r| r.collision)
    }

    /// Largest distance of the true path from the start heading line.
    pub fn max_lateral_deviation(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let start = first.true_pose;
        self.records
            .iter()
            .map(|r| start.inverse_transform_point(r.true_pose.position())[1].abs())
            .fold(0.0, f64::max)
    }
}

/// Runs one episode to goal, collision or budget.
pub fn run_episode(
    scene: &Scene,
    cfg: &EpisodeConfig,
    map: &ReductionMap,
) -> Result<EpisodeLog, WorldError> {
    cfg.validate()?;
    map.validate()?;
    scene
        .validate()
        .map_err(|e| WorldError::InvalidConfig(e.to_string()))?;

    let period = cfg.gait.period();
    let width = cfg.planner.footprint_width;
    let kappa_max = cfg.planner.kappa_max;
    let nominal = arc_delta(VelocityCommand::new(map.v_forward, 0.0), period);
    let gating = cfg.localization.gating_config(nominal.x);

    let mut perception_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    perception_rng.set_stream(1);
    let mut odometry_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    odometry_rng.set_stream(2);
    let mut odometry = OdometrySimulator::from_rng(cfg.localization.noise(), odometry_rng);
    let mut integrator = match cfg.mode {
        SimMode::HighFidelity => Some(GaitIntegrator::new(cfg.gait, cfg.friction, cfg.sim, 2)?),
        SimMode::Reduced => None,
    };

    let mut robot = RobotState::at(scene.start);
    let mut est: PoseEstimate = initialize_known_motion(scene.start, &nominal)?;
    let mut active: Option<(i64, Trajectory)> = None;
    let mut next_id = 0i64;
    let mut last_interval: Option<(Pose, Pose)> = None;
    let mut records = Vec::new();
    let mut plans = Vec::new();
    let mut termination = Termination::BudgetExhausted;

    for cycle in 0..cfg.budget_cycles {
        let mut accepted = true;
        if let Some((true_delta, predicted_delta)) = last_interval {
            est.scale = odometry.drift(est.scale);
            let obs = odometry.observe(&true_delta, est.scale);
            let (next, ok) = gate_and_fuse(&est, &obs, &predicted_delta, &gating);
            est = next;
            accepted = ok;
        }
        let truth = robot.pose;
        let base = CycleRecord {
            cycle,
            true_pose: truth,
            est_pose: est.pose,
            kappa_cmd: 0.0,
            omega_ff: 0.0,
            omega_fb: 0.0,
            traj_id: active.as_ref().map_or(-1, |a| a.0),
            collision: false,
            replanned: false,
            saturated: false,
            observation_accepted: accepted,
            scale: est.scale,
        };
        if check_collision(&truth, scene, width) {
            records.push(CycleRecord {
                collision: true,
                ..base
            });
            termination = Termination::Collision;
            break;
        }
        if scene.goal.contains(truth.position()) {
            records.push(base);
            termination = Termination::GoalReached;
            break;
        }

        let replanned = cycle % cfg.controller.replan_cycles == 0;
        if replanned {
            let mut frame = perceive(
                scene,
                &truth,
                &cfg.camera,
                cfg.perception.flip_probability,
                &mut perception_rng,
            )?;
            frame.binary.camera_pose = est.pose;
            let outcome = plan(&est.pose, &frame.binary, &cfg.camera, &cfg.planner, map)?;
            let (traj_id, certified, selected) = match &outcome.selection {
                Ok(sel) => {
                    let entry = outcome.results.entries[sel.index];
                    let poses = &outcome.candidates.candidates[sel.index].poses;
                    let certified = entry.certified().map(|i| poses[i]).collect();
                    let id = next_id;
                    next_id += 1;
                    active = Some((id, sel.trajectory.clone()));
                    (Some(id), certified, Some(sel.trajectory.clone()))
                }
                Err(PlanError::NoFeasible { .. }) => {
                    active = None;
                    (None, Vec::new(), None)
                }
                Err(e) => return Err(e.clone().into()),
            };
            plans.push(PlanEvent {
                cycle,
                traj_id,
                true_pose: truth,
                est_pose: est.pose,
                certified,
                selected,
            });
        }

        // halt when the next cycle would eat into the reserve at the end of
        // the certified path
        if let Some((_, traj)) = &active {
            if remaining_arclength(&est.pose, traj) < nominal.x + cfg.controller.stop_margin {
                active = None;
            }
        }

        let mut record = CycleRecord {
            replanned,
            traj_id: active.as_ref().map_or(-1, |a| a.0),
            ..base
        };
        let cmd = match &active {
            Some((_, traj)) => {
                let out = control_step(&est.pose, traj, map, &cfg.controller, kappa_max)?;
                record.kappa_cmd = out.kappa_cmd;
                record.omega_ff = out.omega_ff;
                record.omega_fb = out.omega_fb;
                record.saturated = out.saturated;
                Some(out.kappa_cmd)
            }
            None => None,
        };
        records.push(record);

        match cmd {
            Some(kappa) => {
                robot.commanded_kappa = kappa;
                let before = robot.pose;
                robot = match integrator.as_mut() {
                    Some(integ) => step_cycle_high_fidelity(&robot, integ)?,
                    None => step_cycle(&robot, map, &cfg.gait, period),
                };
                let command = VelocityCommand::new(map.v_forward, map.omega_of_kappa(kappa));
                let predicted = arc_delta(command, period);
                let true_delta = if integrator.is_some() {
                    before.between(&robot.pose)
                } else {
                    predicted
                };
                last_interval = Some((true_delta, predicted));
            }
            None => {
                robot.commanded_kappa = 0.0;
                robot.cycle_index += 1;
                last_interval = Some((Pose::identity(), Pose::identity()));
            }
        }
    }

    Ok(EpisodeLog {
        records,
        plans,
        termination,
    })
}

/// Arclength left on `traj` beyond the pose nearest to `pose`.
pub fn remaining_arclength(pose: &Pose, traj: &Trajectory) -> f64 {
    let nearest = traj
        .poses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance_to(pose).total_cmp(&b.1.distance_to(pose)))
        .map_or(0, |(i, _)| i);
    (traj.poses.len().saturating_sub(1) - nearest) as f64 * traj.sample_spacing
}

/// A certified pose whose ground-truth footprint penetrates an obstacle by
/// more than the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub cycle: usize,
    pub pose: Pose,
    pub clearance: f64,
    pub tolerance: f64,
}

/// Maps every certified pose into the true frame and checks it against the
/// scene. The tolerance is the ground depth of one block row at the image
/// row where the pose was checked.
pub fn audit_certified_poses(
    log: &EpisodeLog,
    scene: &Scene,
    cam: &CameraModel,
    width: f64,
) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    for event in &log.plans {
        let correction = event.true_pose.compose(&event.est_pose.inverse());
        for p in &event.certified {
            let world = correction.compose(p);
            if !check_collision(&world, scene, width) {
                continue;
            }
            let local = event.est_pose.inverse_transform_point(p.position());
            let row = cam.ground_to_pixel(local).map_or(0.0, |q| q[1]);
            let tolerance = cam.block_depth_extent(row);
            let clearance = scene.footprint_clearance(&world, width);
            if clearance < -tolerance {
                out.push(AuditViolation {
                    cycle: event.cycle,
                    pose: world,
                    clearance,
                    tolerance,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Bounds, GoalRegion, Obstacle};

    fn map() -> ReductionMap {
        ReductionMap {
            v_forward: 0.022,
            omega_slope: -0.0217,
            omega_intercept: 0.0,
            fit_r_squared: 1.0,
        }
    }

    fn corridor(goal_x: f64) -> Scene {
        Scene {
            bounds: Bounds {
                min: [0.0, 0.0],
                max: [3.0, 1.0],
            },
            obstacles: vec![],
            goal: GoalRegion {
                center: [goal_x, 0.5],
                radius: 0.2,
            },
            start: Pose::new(0.2, 0.5, 0.0),
        }
    }

    fn quiet() -> EpisodeConfig {
        EpisodeConfig {
            localization: LocalizationConfig::noiseless(),
            ..EpisodeConfig::default()
        }
    }

    #[test]
    fn straight_step_and_phase() {
        let g = GaitParams::default();
        let s = step_cycle(&RobotState::at(Pose::identity()), &map(), &g, g.period());
        assert!((s.pose.x - 0.022 * 2.5).abs() < 1e-15);
        assert_eq!(s.pose.y, 0.0);
        assert_eq!(s.gait_phase, 0.0);
        assert_eq!(s.cycle_index, 1);
        let mut half = RobotState::at(Pose::identity());
        half.commanded_kappa = 1.1;
        let mut whole = half.clone();
        half = step_cycle(&step_cycle(&half, &map(), &g, 1.25), &map(), &g, 1.25);
        whole = step_cycle(&whole, &map(), &g, 2.5);
        assert!(half.pose.distance_to(&whole.pose) < 1e-12);
        assert!((half.gait_phase - whole.gait_phase).abs() < 1e-12);
    }

    #[test]
    fn empty_corridor_reaches_goal() {
        let log = run_episode(&corridor(2.0), &quiet(), &map()).unwrap();
        assert_eq!(log.termination, Termination::GoalReached);
        assert!(!log.any_collision());
        assert_eq!(log.records.len(), log.records.last().unwrap().cycle + 1);
    }

    #[test]
    fn start_in_obstacle_collides_at_cycle_zero() {
        let mut s = corridor(2.0);
        s.obstacles.push(Obstacle::Disc {
            center: [0.2, 0.5],
            radius: 0.1,
        });
        let log = run_episode(&s, &quiet(), &map()).unwrap();
        assert_eq!(log.termination, Termination::Collision);
        assert_eq!(log.records.len(), 1);
        assert!(log.records[0].collision);
    }

    #[test]
    fn replans_on_cadence_and_noise_free_estimate_is_exact() {
        let log = run_episode(&corridor(2.0), &quiet(), &map()).unwrap();
        for r in &log.records {
            assert_eq!(r.replanned, r.cycle % 4 == 0);
            assert_eq!(r.true_pose, r.est_pose);
        }
        let csv = log.to_csv();
        assert!(csv.starts_with(EpisodeLog::CSV_HEADER));
        assert_eq!(csv.lines().count(), log.records.len() + 1);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = EpisodeConfig {
            seed: 11,
            perception: PerceptionConfig {
                flip_probability: 0.05,
            },
            ..EpisodeConfig::default()
        };
        let a = run_episode(&corridor(2.0), &cfg, &map()).unwrap();
        let b = run_episode(&corridor(2.0), &cfg, &map()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
