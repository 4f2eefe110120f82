//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use serpnav::config::{load_scenario, Scenario};
use serpnav::perception::{CameraModel, TraversabilityImage};
use serpnav::planner::Trajectory;
use serpnav::scene::{check_collision, Bounds, GoalRegion, Obstacle, Scene};
use serpnav::{Pose, ReductionMap};

pub fn bundled(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"));
    load_scenario(&path).unwrap()
}

pub const BUNDLED: [&str; 4] = [
    "three_obstacles",
    "empty_corridor",
    "wall_ahead",
    "goal_behind",
];

/// Hand-set map close to the fitted one, for tests that do not exercise the fit.
pub fn nominal_map() -> ReductionMap {
    ReductionMap {
        v_forward: 0.022,
        omega_slope: -0.0217,
        omega_intercept: 0.0,
        fit_r_squared: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleFootprint {
    Behind,
    Below,
    Outside,
    Pixels(Vec<(i64, i64)>),
}

/// Camera-frame coordinates (right, down, forward) of a world ground point,
/// built from explicit basis vectors.
fn camera_coords(world: [f64; 2], head: &Pose, cam: &CameraModel) -> [f64; 3] {
    let (s, c) = (head.theta.sin(), head.theta.cos());
    let (dx, dy) = (world[0] - head.x, world[1] - head.y);
    // head frame: x forward, y left, z up; camera center at height h
    let p = [c * dx + s * dy, -s * dx + c * dy, -cam.mount_height];
    let (sp, cp) = (cam.mount_pitch.sin(), cam.mount_pitch.cos());
    let forward = [cp, 0.0, -sp];
    let right = [0.0, -1.0, 0.0];
    let down = [-sp, 0.0, -cp];
    let dot = |a: [f64; 3]| a[0] * p[0] + a[1] * p[1] + a[2] * p[2];
    [dot(right), dot(down), dot(forward)]
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Projects the head segment of `pose` and, if in view, lists every pixel
/// of its bounding box that lies on the discrete line.
pub fn oracle_footprint(
    pose: &Pose,
    head: &Pose,
    cam: &CameraModel,
    width: f64,
) -> OracleFootprint {
    let half = width / 2.0;
    let left = [-pose.theta.sin(), pose.theta.cos()];
    let ends = [
        [pose.x + half * left[0], pose.y + half * left[1]],
        [pose.x - half * left[0], pose.y - half * left[1]],
    ];
    let mut px = [(0i64, 0i64); 2];
    for (slot, e) in px.iter_mut().zip(ends) {
        let q = camera_coords(e, head, cam);
        if q[2] <= 0.0 {
            return OracleFootprint::Behind;
        }
        *slot = (
            round_half_up(cam.cx + cam.fx * q[0] / q[2]),
            round_half_up(cam.cy + cam.fy * q[1] / q[2]),
        );
    }
    let (w, h) = (cam.width as i64, cam.height as i64);
    if px.iter().any(|p| p.1 >= h) {
        return OracleFootprint::Below;
    }
    if px.iter().any(|p| p.0 < 0 || p.0 >= w || p.1 < 0) {
        return OracleFootprint::Outside;
    }
    let (a, b) = (px[0], px[1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let n = dx.abs().max(dy.abs());
    let mut out = Vec::new();
    for y in a.1.min(b.1)..=a.1.max(b.1) {
        for x in a.0.min(b.0)..=a.0.max(b.0) {
            let on = if n == 0 {
                true
            } else if dx.abs() >= dy.abs() {
                let k = (x - a.0) * dx.signum();
                y == a.1 + round_half_up(k as f64 * dy as f64 / n as f64)
            } else {
                let k = (y - a.1) * dy.signum();
                x == a.0 + round_half_up(k as f64 * dx as f64 / n as f64)
            };
            if on {
                out.push((x, y));
            }
        }
    }
    OracleFootprint::Pixels(out)
}

/// Reference truncation: `(first_checked, last_valid, first_blocked)`.
pub fn oracle_truncation(
    traj: &Trajectory,
    img: &TraversabilityImage,
    cam: &CameraModel,
    width: f64,
) -> (usize, Option<usize>, Option<usize>) {
    let mut first_checked = None;
    let mut last_valid = None;
    for (i, pose) in traj.poses.iter().enumerate() {
        let fp = oracle_footprint(pose, &img.camera_pose, cam, width);
        if first_checked.is_none() {
            if fp == OracleFootprint::Below {
                continue;
            }
            first_checked = Some(i);
        }
        let clear = match &fp {
            OracleFootprint::Pixels(px) => px
                .iter()
                .all(|&(u, v)| img.pixels[v as usize * img.width + u as usize]),
            _ => false,
        };
        if !clear {
            return (first_checked.unwrap(), last_valid, Some(i));
        }
        last_valid = Some(i);
    }
    (first_checked.unwrap_or(traj.poses.len()), last_valid, None)
}

/// Random convex obstacles in a 4 m x 2 m arena.
pub fn random_scene<R: Rng>(rng: &mut R) -> Scene {
    let bounds = Bounds {
        min: [0.0, 0.0],
        max: [4.0, 2.0],
    };
    let count = rng.random_range(1..=6);
    let obstacles = (0..count)
        .map(|_| {
            let c = [rng.random_range(0.3..3.7), rng.random_range(0.2..1.8)];
            if rng.random_bool(0.5) {
                Obstacle::Disc {
                    center: c,
                    radius: rng.random_range(0.03..0.25),
                }
            } else {
                let (hw, hh) = (rng.random_range(0.02..0.2), rng.random_range(0.02..0.2));
                let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let (s, co) = a.sin_cos();
                let vertices = [[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]]
                    .iter()
                    .map(|p| [c[0] + co * p[0] - s * p[1], c[1] + s * p[0] + co * p[1]])
                    .collect();
                Obstacle::Polygon { vertices }
            }
        })
        .collect();
    Scene {
        bounds,
        obstacles,
        goal: GoalRegion {
            center: [3.9, 1.0],
            radius: 0.05,
        },
        start: Pose::new(0.1, 1.0, 0.0),
    }
}

pub fn random_clear_pose<R: Rng>(scene: &Scene, rng: &mut R, width: f64) -> Pose {
    loop {
        let p = Pose::new(
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..1.9),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if !check_collision(&p, scene, width) && scene.footprint_clearance(&p, width) > 0.01 {
            return p;
        }
    }
}
