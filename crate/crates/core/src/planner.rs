//! Receding-horizon planning in image space: constant-curvature candidates
//! are sampled into closely spaced head poses, each pose's head footprint is
//! projected into the current binary image, and the longest collision-free
//! candidate is kept.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::ReductionMap;
use crate::kinematics::{propagate, Pose, VelocityCommand};
use crate::perception::{CameraModel, TraversabilityImage};
use crate::raster::{line_pixels, pixel_of, RgbImage};
use crate::scene::{head_segment, DEFAULT_FOOTPRINT_WIDTH};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("invalid planner settings: {0}")]
    InvalidConfig(String),
    #[error("no feasible trajectory: longest feasible length {longest} m below {threshold} m")]
    NoFeasible { longest: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Number of candidates (odd).
    pub candidates: usize,
    pub kappa_max: f64,
    pub horizon: f64,
    pub spacing: f64,
    pub footprint_width: f64,
    /// Shortest feasible length worth following; defaults to one spacing.
    pub min_progress: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            candidates: 5,
            kappa_max: 2.0,
            horizon: 0.5,
            spacing: 0.02,
            footprint_width: DEFAULT_FOOTPRINT_WIDTH,
            min_progress: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidConfig(m));
        if self.candidates < 3 || self.candidates.is_multiple_of(2) {
            return bad(format!(
                "candidate count {} must be odd and >= 3",
                self.candidates
            ));
        }
        if !(self.kappa_max > 0.0 && self.kappa_max.is_finite()) {
            return bad(format!("kappa_max {} must be positive", self.kappa_max));
        }
        if !(self.spacing > 0.0 && self.horizon >= self.spacing) {
            return bad(format!(
                "need 0 < spacing ({}) <= horizon ({})",
                self.spacing, self.horizon
            ));
        }
        if !(self.footprint_width > 0.0) {
            return bad("footprint width must be positive".into());
        }
        Ok(())
    }

    pub fn min_progress(&self) -> f64 {
        self.min_progress.unwrap_or(self.spacing)
    }
}

/// A constant-curvature candidate sampled at fixed arclength spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kappa: f64,
    pub max_arclength: f64,
    pub sample_spacing: f64,
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Trajectory>,
}

/// Curvature values evenly spaced over `[-kappa_max, kappa_max]`.
pub fn candidate_curvatures(n: usize, kappa_max: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    (0..n)
        .map(|i| {
            let k = i as f64 - half;
            if k == 0.0 {
                0.0
            } else {
                kappa_max * k / half
            }
        })
        .collect()
}

pub fn sample_trajectories(
    pose: &Pose,
    n: usize,
    kappa_max: f64,
    horizon: f64,
    spacing: f64,
    map: &ReductionMap,
) -> Result<CandidateSet, PlanError> {
    let cfg = PlannerConfig {
        candidates: n,
        kappa_max,
        horizon,
        spacing,
        ..PlannerConfig::default()
    };
    cfg.validate()?;
    if !(map.v_forward > 0.0) {
        return Err(PlanError::InvalidConfig(
            "forward speed must be positive".into(),
        ));
    }
    let count = (horizon / spacing + 1e-9).floor() as usize;
    let candidates = candidate_curvatures(n, kappa_max)
        .into_iter()
        .map(|kappa| {
            let cmd = VelocityCommand::new(map.v_forward, map.omega_of_kappa(kappa));
            let poses = (0..=count)
                .map(|j| propagate(pose, cmd, j as f64 * spacing / map.v_forward))
                .collect();
            Trajectory {
                kappa,
                max_arclength: count as f64 * spacing,
                sample_spacing: spacing,
                poses,
            }
        })
        .collect();
    Ok(CandidateSet { candidates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutOfView {
    Behind,
    /// In front of the camera but nearer than the bottom image row.
    BelowImage,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    /// Continuous image coordinates of both segment endpoints.
    Segment([f64; 2], [f64; 2]),
    OutOfView(OutOfView),
}

impl Footprint {
    /// Pixels of the rasterized segment, if in view.
    pub fn pixels(&self) -> Option<Vec<(i64, i64)>> {
        match self {
            Footprint::Segment(a, b) => Some(line_pixels(
                (pixel_of(a[0]), pixel_of(a[1])),
                (pixel_of(b[0]), pixel_of(b[1])),
            )),
            Footprint::OutOfView(_) => None,
        }
    }
}

/// Projects the head's ground segment at `world_pose` into the camera at
/// `camera_pose`.
pub fn project_footprint(
    world_pose: &Pose,
    camera_pose: &Pose,
    cam: &CameraModel,
    width: f64,
) -> Footprint {
    let (a, b) = head_segment(world_pose, width);
    let mut uv = [[0.0; 2]; 2];
    for (slot, p) in uv.iter_mut().zip([a, b]) {
        match cam.ground_to_pixel(camera_pose.inverse_transform_point(p)) {
            Some(q) => *slot = q,
            None => return Footprint::OutOfView(OutOfView::Behind),
        }
    }
    let (w, h) = (cam.width as i64, cam.height as i64);
    if uv.iter().any(|q| pixel_of(q[1]) >= h) {
        return Footprint::OutOfView(OutOfView::BelowImage);
    }
    let inside = |q: &[f64; 2]| {
        let (i, j) = (pixel_of(q[0]), pixel_of(q[1]));
        i >= 0 && i < w && j >= 0
    };
    if uv.iter().all(inside) {
        Footprint::Segment(uv[0], uv[1])
    } else {
        Footprint::OutOfView(OutOfView::Outside)
    }
}

/// Outcome of checking one candidate against an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible_length: f64,
    /// First pose that failed (blocked pixel or out of view).
    pub first_blocked_index: Option<usize>,
    /// Last pose whose footprint was seen entirely on ground.
    pub last_valid_index: Option<usize>,
    /// Leading poses nearer than the bottom image row are skipped: they are
    /// neither certified nor allowed to truncate.
    pub first_checked_index: usize,
}

impl Feasibility {
    /// Indices of the poses certified collision-free by the image.
    pub fn certified(&self) -> std::ops::Range<usize> {
        match self.last_valid_index {
            Some(last) => self.first_checked_index..last + 1,
            None => 0..0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub entries: Vec<Feasibility>,
}

fn footprint_on_ground(fp: &Footprint, img: &TraversabilityImage) -> bool {
    match fp.pixels() {
        Some(px) => px.iter().all(|&(u, v)| img.get(u as usize, v as usize)),
        None => false,
    }
}

pub fn collision_check(
    traj: &Trajectory,
    img: &TraversabilityImage,
    cam: &CameraModel,
    width: f64,
) -> Feasibility {
    let mut leading = true;
    let mut first_checked = traj.poses.len();
    let mut last_valid = None;
    let mut first_blocked = None;
    for (i, pose) in traj.poses.iter().enumerate() {
        let fp = project_footprint(pose, &img.camera_pose, cam, width);
        if leading {
            if fp == Footprint::OutOfView(OutOfView::BelowImage) {
                continue;
            }
            leading = false;
            first_checked = i;
        }
        if footprint_on_ground(&fp, img) {
            last_valid = Some(i);
        } else {
            first_blocked = Some(i);
            break;
        }
    }
    Feasibility {
        feasible_length: last_valid.map_or(0.0, |i| i as f64 * traj.sample_spacing),
        first_blocked_index: first_blocked,
        last_valid_index: last_valid,
        first_checked_index: first_checked,
    }
}

pub fn check_candidates(
    set: &CandidateSet,
    img: &TraversabilityImage,
    cam: &CameraModel,
    width: f64,
) -> FeasibilityResult {
    FeasibilityResult {
        entries: set
            .candidates
            .iter()
            .map(|t| collision_check(t, img, cam, width))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub feasible_length: f64,
    /// The chosen candidate cut at its last valid pose.
    pub trajectory: Trajectory,
}

/// Longest feasible length, then smallest `|kappa|`, then positive `kappa`.
pub fn select_trajectory(
    results: &FeasibilityResult,
    candidates: &CandidateSet,
    min_progress: f64,
) -> Result<Selection, PlanError> {
    let mut best: Option<usize> = None;
    for (i, entry) in results.entries.iter().enumerate() {
        let Some(b) = best else {
            best = Some(i);
            continue;
        };
        let (l, bl) = (entry.feasible_length, results.entries[b].feasible_length);
        let (k, bk) = (
            candidates.candidates[i].kappa,
            candidates.candidates[b].kappa,
        );
        let better = l > bl || (l == bl && (k.abs() < bk.abs() || (k.abs() == bk.abs() && k > bk)));
        if better {
            best = Some(i);
        }
    }
    let Some(index) = best else {
        return Err(PlanError::InvalidConfig("empty candidate set".into()));
    };
    let entry = results.entries[index];
    if entry.feasible_length < min_progress || entry.last_valid_index.is_none() {
        return Err(PlanError::NoFeasible {
            longest: entry.feasible_length,
            threshold: min_progress,
        });
    }
    let src = &candidates.candidates[index];
    let last = entry.last_valid_index.unwrap_or(0);
    Ok(Selection {
        index,
        feasible_length: entry.feasible_length,
        trajectory: Trajectory {
            kappa: src.kappa,
            max_arclength: entry.feasible_length,
            sample_spacing: src.sample_spacing,
            poses: src.poses[..=last].to_vec(),
        },
    })
}

/// Candidate generation, image checks and selection for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub candidates: CandidateSet,
    pub results: FeasibilityResult,
    pub selection: Result<Selection, PlanError>,
}

pub fn plan(
    pose: &Pose,
    img: &TraversabilityImage,
    cam: &CameraModel,
    cfg: &PlannerConfig,
    map: &ReductionMap,
) -> Result<PlanOutcome, PlanError> {
    let candidates = sample_trajectories(
        pose,
        cfg.candidates,
        cfg.kappa_max,
        cfg.horizon,
        cfg.spacing,
        map,
    )?;
    let results = check_candidates(&candidates, img, cam, cfg.footprint_width);
    let selection = select_trajectory(&results, &candidates, cfg.min_progress());
    Ok(PlanOutcome {
        candidates,
        results,
        selection,
    })
}

pub const GROUND_GRAY: [u8; 3] = [190, 190, 190];
pub const BLOCKED_GRAY: [u8; 3] = [40, 40, 40];
pub const CERTIFIED_COLOR: [u8; 3] = [0, 200, 0];
pub const SELECTED_COLOR: [u8; 3] = [0, 120, 255];
pub const BLOCKED_COLOR: [u8; 3] = [230, 0, 0];
pub const UNCHECKED_COLOR: [u8; 3] = [240, 160, 0];

/// Debug overlay: every candidate pose's footprint drawn over `base`,
/// colored certified / selected / first blocked / beyond truncation.
pub fn render_overlay(
    base: &TraversabilityImage,
    outcome: &PlanOutcome,
    cam: &CameraModel,
    width: f64,
) -> RgbImage {
    let mut out = RgbImage::new(base.width, base.height, BLOCKED_GRAY);
    for v in 0..base.height {
        for u in 0..base.width {
            if base.get(u, v) {
                out.put(u as i64, v as i64, GROUND_GRAY);
            }
        }
    }
    let selected = outcome.selection.as_ref().ok().map(|s| s.index);
    for (ci, (traj, entry)) in outcome
        .candidates
        .candidates
        .iter()
        .zip(&outcome.results.entries)
        .enumerate()
    {
        let certified = entry.certified();
        for (i, pose) in traj.poses.iter().enumerate() {
            let color = if certified.contains(&i) {
                if selected == Some(ci) {
                    SELECTED_COLOR
                } else {
                    CERTIFIED_COLOR
                }
            } else if entry.first_blocked_index == Some(i) {
                BLOCKED_COLOR
            } else if i >= entry.first_checked_index {
                UNCHECKED_COLOR
            } else {
                continue;
            };
            let fp = project_footprint(pose, &base.camera_pose, cam, width);
            if let Some(px) = fp.pixels() {
                for (u, v) in px {
                    out.put(u, v, color);
                }
            }
        }
    }
    out
}
