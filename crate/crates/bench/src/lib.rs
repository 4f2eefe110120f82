//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use serpnav::perception::{perceive, CameraModel, TraversabilityImage};
use serpnav::planner::{sample_trajectories, CandidateSet, PlannerConfig};
use serpnav::scene::{Bounds, GoalRegion, Obstacle, Scene};
use serpnav::{Pose, ReductionMap};

pub fn map() -> ReductionMap {
    ReductionMap {
        v_forward: 0.022,
        omega_slope: -0.0217,
        omega_intercept: 0.0,
        fit_r_squared: 1.0,
    }
}

/// Corridor with a few obstacles inside the default camera's view from the start.
pub fn scene() -> Scene {
    Scene {
        bounds: Bounds {
            min: [0.0, 0.0],
            max: [3.0, 1.2],
        },
        obstacles: vec![
            Obstacle::Disc {
                center: [0.55, 0.65],
                radius: 0.06,
            },
            Obstacle::Polygon {
                vertices: vec![[0.7, 0.35], [0.8, 0.35], [0.8, 0.45], [0.7, 0.45]],
            },
            Obstacle::Disc {
                center: [1.1, 0.9],
                radius: 0.1,
            },
        ],
        goal: GoalRegion {
            center: [2.8, 0.6],
            radius: 0.2,
        },
        start: Pose::new(0.2, 0.6, 0.0),
    }
}

/// Perceived binary image and candidate set at the scene start.
pub fn frame() -> (
    TraversabilityImage,
    CandidateSet,
    CameraModel,
    PlannerConfig,
) {
    let scene = scene();
    let cam = CameraModel::default();
    let cfg = PlannerConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let img = perceive(&scene, &scene.start, &cam, 0.0, &mut rng)
        .unwrap()
        .binary;
    let set = sample_trajectories(
        &scene.start,
        cfg.candidates,
        cfg.kappa_max,
        cfg.horizon,
        cfg.spacing,
        &map(),
    )
    .unwrap();
    (img, set, cam, cfg)
}
