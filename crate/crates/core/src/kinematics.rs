//! Planar rigid poses and exact constant-twist (unicycle) propagation.
//!
//! Every consumer of robot motion (gait reduction, planning, tracking,
//! localization) goes through [`propagate`], so predictions and ground truth
//! are computed by the same arithmetic.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Below this swept angle the arc is evaluated with its series expansion.
pub const STRAIGHT_BRANCH_THRESHOLD: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// A pose on the plane, `theta` kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn heading(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    /// `self * other`: applies `other` expressed in this pose's frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Relative pose taking `self` to `other`, expressed in `self`'s frame.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// Maps a point given in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Forward speed and turn rate held constant over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Body-frame displacement produced by holding `cmd` for `dt` seconds.
pub fn arc_delta(cmd: VelocityCommand, dt: f64) -> Pose {
    let dist = cmd.v * dt;
    let phi = cmd.omega * dt;
    if phi.abs() < STRAIGHT_BRANCH_THRESHOLD {
        // sin(phi)/phi ~ 1 - phi^2/6, (1 - cos(phi))/phi ~ phi/2 - phi^3/24
        let phi2 = phi * phi;
        Pose::new(
            dist * (1.0 - phi2 / 6.0),
            dist * (0.5 * phi - phi * phi2 / 24.0),
            phi,
        )
    } else {
        let radius = cmd.v / cmd.omega;
        let half = (0.5 * phi).sin();
        Pose::new(radius * phi.sin(), 2.0 * radius * half * half, phi)
    }
}

/// Displacement from holding a full planar twist (with lateral speed) for `dt`.
pub fn exp_twist(vx: f64, vy: f64, omega: f64, dt: f64) -> Pose {
    let (a, b) = arc_coefficients(omega * dt);
    let (tx, ty) = (vx * dt, vy * dt);
    Pose::new(a * tx - b * ty, b * tx + a * ty, omega * dt)
}

/// Constant twist `(vx, vy, omega)` that produces `delta` over `dt`.
pub fn log_twist(delta: &Pose, dt: f64) -> [f64; 3] {
    let (a, b) = arc_coefficients(delta.theta);
    let det = a * a + b * b;
    let tx = (a * delta.x + b * delta.y) / det;
    let ty = (-b * delta.x + a * delta.y) / det;
    [tx / dt, ty / dt, delta.theta / dt]
}

/// `(sin(phi)/phi, (1 - cos(phi))/phi)` with a series near zero.
fn arc_coefficients(phi: f64) -> (f64, f64) {
    if phi.abs() < 1e-6 {
        let phi2 = phi * phi;
        (1.0 - phi2 / 6.0, 0.5 * phi - phi * phi2 / 24.0)
    } else {
        (phi.sin() / phi, (1.0 - phi.cos()) / phi)
    }
}

/// Exact unicycle integration over `dt` (straight line or circular arc).
pub fn propagate(pose: &Pose, cmd: VelocityCommand, dt: f64) -> Pose {
    debug_assert!(dt >= 0.0, "negative propagation interval");
    pose.compose(&arc_delta(cmd, dt))
}

/// Tracking error of `target` seen from `current`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseError {
    /// Target offset along the current heading (m).
    pub along: f64,
    /// Target offset to the left of the current heading (m).
    pub cross: f64,
    /// `target.theta - current.theta`, wrapped.
    pub heading: f64,
}

pub fn pose_error(current: &Pose, target: &Pose) -> PoseError {
    let [along, cross] = current.inverse_transform_point(target.position());
    PoseError {
        along,
        cross,
        heading: normalize_angle(target.theta - current.theta),
    }
}
