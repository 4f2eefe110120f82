//! Ground-truth planar world: arena bounds, convex obstacles, goal region.
//!
//! Obstacles are treated as tall vertical prisms: they block the head
//! footprint and occlude the ground behind them from the camera.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;

pub const SCENE_FORMAT: u32 = 1;

/// Head width used by the ground-truth checker and the planner (m).
pub const DEFAULT_FOOTPRINT_WIDTH: f64 = 0.051;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene file parse error: {0}")]
    Parse(String),
    #[error("unsupported scene format {found}, expected {SCENE_FORMAT}")]
    Format { found: u32 },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Distance from `p` to the nearest wall, negative outside.
    pub fn inner_distance(&self, p: Point) -> f64 {
        let dx = (p[0] - self.min[0]).min(self.max[0] - p[0]);
        let dy = (p[1] - self.min[1]).min(self.max[1] - p[1]);
        dx.min(dy)
    }

    /// First distance along the ray `origin + t dir` (unit `dir`) where it
    /// leaves the rectangle; `origin` must be inside.
    pub fn exit_distance(&self, origin: Point, dir: Point) -> f64 {
        let mut t = f64::INFINITY;
        for axis in 0..2 {
            if dir[axis] > 0.0 {
                t = t.min((self.max[axis] - origin[axis]) / dir[axis]);
            } else if dir[axis] < 0.0 {
                t = t.min((self.min[axis] - origin[axis]) / dir[axis]);
            }
        }
        t.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Disc {
        center: Point,
        radius: f64,
    },
    /// Convex polygon; vertex order may be either orientation.
    Polygon {
        vertices: Vec<Point>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalRegion {
    pub center: Point,
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub bounds: Bounds,
    pub obstacles: Vec<Obstacle>,
    pub goal: GoalRegion,
    pub start: Pose,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    format: u32,
    bounds: Bounds,
    start: Pose,
    goal: GoalRegion,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Distance from `p` to the closed segment `a b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on =
        |p: Point, q: Point, r: Point, o: f64| o == 0.0 && point_segment_distance(r, p, q) == 0.0;
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

impl Obstacle {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Obstacle::Disc { center, radius } => dist(p, *center) <= *radius,
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                let mut sign = 0.0f64;
                for i in 0..n {
                    let c = cross(sub(vertices[(i + 1) % n], vertices[i]), sub(p, vertices[i]));
                    if c != 0.0 {
                        if sign != 0.0 && c.signum() != sign {
                            return false;
                        }
                        sign = c.signum();
                    }
                }
                true
            }
        }
    }

    /// Signed distance from `p` to the obstacle boundary (negative inside).
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Obstacle::Disc { center, radius } => dist(p, *center) - radius,
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                let edge = (0..n)
                    .map(|i| point_segment_distance(p, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if self.contains(p) {
                    -edge
                } else {
                    edge
                }
            }
        }
    }

    /// Whether the closed segment `a b` touches the obstacle.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        match self {
            Obstacle::Disc { center, radius } => point_segment_distance(*center, a, b) <= *radius,
            Obstacle::Polygon { vertices } => {
                if self.contains(a) || self.contains(b) {
                    return true;
                }
                let n = vertices.len();
                (0..n).any(|i| segments_intersect(a, b, vertices[i], vertices[(i + 1) % n]))
            }
        }
    }

    /// Smallest `t >= 0` with `origin + t dir` on the obstacle (unit `dir`).
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        if self.contains(origin) {
            return Some(0.0);
        }
        match self {
            Obstacle::Disc { center, radius } => {
                let oc = sub(origin, *center);
                let b = dot(oc, dir);
                let c = dot(oc, oc) - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                let mut best: Option<f64> = None;
                for i in 0..n {
                    let p = vertices[i];
                    let e = sub(vertices[(i + 1) % n], p);
                    let denom = cross(dir, e);
                    if denom == 0.0 {
                        continue;
                    }
                    let w = sub(p, origin);
                    let t = cross(w, e) / denom;
                    let u = cross(w, dir) / denom;
                    if t >= 0.0 && (0.0..=1.0).contains(&u) {
                        best = Some(best.map_or(t, |b: f64| b.min(t)));
                    }
                }
                best
            }
        }
    }

    fn vertices_within(&self, bounds: &Bounds) -> bool {
        match self {
            Obstacle::Disc { center, radius } => bounds.inner_distance(*center) >= *radius,
            Obstacle::Polygon { vertices } => vertices.iter().all(|v| bounds.contains(*v)),
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        match self {
            Obstacle::Disc { radius, center } => {
                if !(*radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(SceneError::Invalid(format!("bad disc radius {radius}")));
                }
            }
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(SceneError::Invalid("polygon needs 3+ vertices".into()));
                }
                let mut sign = 0.0f64;
                for i in 0..n {
                    let c = cross(
                        sub(vertices[(i + 1) % n], vertices[i]),
                        sub(vertices[(i + 2) % n], vertices[(i + 1) % n]),
                    );
                    if c != 0.0 {
                        if sign != 0.0 && c.signum() != sign {
                            return Err(SceneError::Invalid("polygon is not convex".into()));
                        }
                        sign = c.signum();
                    }
                }
                if sign == 0.0 {
                    return Err(SceneError::Invalid("polygon is degenerate".into()));
                }
            }
        }
        Ok(())
    }
}

/// Endpoints of the head segment: `width` across the heading, centered at the pose.
pub fn head_segment(pose: &Pose, width: f64) -> (Point, Point) {
    let hw = 0.5 * width;
    (
        pose.transform_point([0.0, hw]),
        pose.transform_point([0.0, -hw]),
    )
}

impl Scene {
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = toml::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        if file.format != SCENE_FORMAT {
            return Err(SceneError::Format { found: file.format });
        }
        let scene = Scene {
            bounds: file.bounds,
            obstacles: file.obstacles,
            goal: file.goal,
            start: Pose::new(file.start.x, file.start.y, file.start.theta),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        let file = SceneFile {
            format: SCENE_FORMAT,
            bounds: self.bounds,
            start: self.start,
            goal: self.goal,
            obstacles: self.obstacles.clone(),
        };
        toml::to_string(&file).expect("scene serializes")
    }

    /// Structural checks. A start pose inside an obstacle is allowed so the
    /// episode runner can report it; see [`Scene::start_is_clear`].
    pub fn validate(&self) -> Result<(), SceneError> {
        let b = &self.bounds;
        if !(b.min[0] < b.max[0] && b.min[1] < b.max[1]) {
            return Err(SceneError::Invalid("empty bounds".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()?;
            if !o.vertices_within(b) {
                return Err(SceneError::Invalid(format!(
                    "obstacle {i} leaves the bounds"
                )));
            }
        }
        if !(self.goal.radius > 0.0) {
            return Err(SceneError::Invalid("goal radius must be positive".into()));
        }
        if !self.start.is_finite() || !b.contains(self.start.position()) {
            return Err(SceneError::Invalid("start pose outside bounds".into()));
        }
        Ok(())
    }

    pub fn start_is_clear(&self, width: f64) -> bool {
        !check_collision(&self.start, self, width)
    }

    /// Whether the goal disc avoids every obstacle.
    pub fn goal_is_clear(&self) -> bool {
        self.obstacles
            .iter()
            .all(|o| o.signed_distance(self.goal.center) > self.goal.radius)
    }

    pub fn point_free(&self, p: Point) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance along a unit ray from an in-bounds origin to the first
    /// obstacle or wall.
    pub fn ray_cast(&self, origin: Point, dir: Point) -> f64 {
        self.obstacles
            .iter()
            .filter_map(|o| o.ray_hit(origin, dir))
            .fold(self.bounds.exit_distance(origin, dir), f64::min)
    }

    /// Signed clearance of the head segment: distance to the nearest
    /// obstacle or wall, negative when penetrating.
    pub fn footprint_clearance(&self, pose: &Pose, width: f64) -> f64 {
        let (a, b) = head_segment(pose, width);
        const SAMPLES: usize = 21;
        let samples = (0..SAMPLES).map(|i| {
            let t = i as f64 / (SAMPLES - 1) as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        });
        let mut best = f64::INFINITY;
        for p in samples {
            best = best.min(self.bounds.inner_distance(p));
            for o in &self.obstacles {
                best = best.min(o.signed_distance(p));
            }
        }
        // exact segment distance to discs when outside
        for o in &self.obstacles {
            if let Obstacle::Disc { center, radius } = o {
                let d = point_segment_distance(*center, a, b) - radius;
                if d >= 0.0 {
                    best = best.min(d);
                }
            }
        }
        best
    }
}

/// Ground-truth check: does the head segment at `pose` touch an obstacle or
/// leave the bounds?
pub fn check_collision(pose: &Pose, scene: &Scene, footprint_width: f64) -> bool {
    let (a, b) = head_segment(pose, footprint_width);
    if !scene.bounds.contains(a) || !scene.bounds.contains(b) {
        return true;
    }
    scene.obstacles.iter().any(|o| o.intersects_segment(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arena() -> Scene {
        Scene {
            bounds: Bounds {
                min: [0.0, 0.0],
                max: [2.0, 1.0],
            },
            obstacles: vec![],
            goal: GoalRegion {
                center: [1.8, 0.5],
                radius: 0.1,
            },
            start: Pose::new(0.2, 0.5, 0.0),
        }
    }

    fn cluttered() -> Scene {
        let mut s = arena();
        s.obstacles = vec![
            Obstacle::Disc {
                center: [0.7, 0.4],
                radius: 0.12,
            },
            Obstacle::Polygon {
                vertices: vec![[1.1, 0.6], [1.4, 0.65], [1.3, 0.9], [1.05, 0.85]],
            },
            Obstacle::Polygon {
                vertices: vec![[1.5, 0.1], [1.5, 0.3], [1.7, 0.2]],
            },
        ];
        s
    }

    #[test]
    fn empty_scene_never_collides_in_bounds() {
        let s = arena();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = Pose::new(
                rng.random_range(0.05..1.95),
                rng.random_range(0.05..0.95),
                rng.random_range(-3.0..3.0),
            );
            assert!(!check_collision(&p, &s, DEFAULT_FOOTPRINT_WIDTH));
        }
        assert!(!check_collision(&Pose::new(0.01, 0.5, 0.0), &s, 0.051));
        assert!(check_collision(&Pose::new(0.01, 0.5, 1.0), &s, 0.051));
    }

    #[test]
    fn inside_obstacle_collides() {
        let s = cluttered();
        assert!(check_collision(&Pose::new(0.7, 0.4, 0.3), &s, 0.051));
        assert!(check_collision(&Pose::new(1.2, 0.75, 0.0), &s, 0.051));
        assert!(!check_collision(&Pose::new(0.3, 0.8, 0.0), &s, 0.051));
    }

    #[test]
    fn matches_rasterized_occupancy_oracle() {
        // 1 mm occupancy grid built only from point membership tests
        let s = cluttered();
        let res = 0.001;
        let (nx, ny) = (2000usize, 1000usize);
        let mut occ = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = [(i as f64 + 0.5) * res, (j as f64 + 0.5) * res];
                occ[j * nx + i] = s.obstacles.iter().any(|o| o.contains(p));
            }
        }
        let oracle = |pose: &Pose| -> bool {
            let (a, b) = head_segment(pose, 0.051);
            if !s.bounds.contains(a) || !s.bounds.contains(b) {
                return true;
            }
            let steps = 200;
            (0..=steps).any(|k| {
                let t = k as f64 / steps as f64;
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let i = ((p[0] / res) as usize).min(nx - 1);
                let j = ((p[1] / res) as usize).min(ny - 1);
                occ[j * nx + i]
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        for _ in 0..1000 {
            let p = Pose::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..1.0),
                rng.random_range(-3.2..3.2),
            );
            // skip the 2 mm band around obstacle and wall boundaries
            if s.footprint_clearance(&p, 0.051).abs() < 0.002 {
                continue;
            }
            checked += 1;
            assert_eq!(check_collision(&p, &s, 0.051), oracle(&p), "{p:?}");
        }
        assert!(checked > 900);
    }

    #[test]
    fn ray_hits() {
        let disc = Obstacle::Disc {
            center: [1.0, 0.0],
            radius: 0.25,
        };
        assert!((disc.ray_hit([0.0, 0.0], [1.0, 0.0]).unwrap() - 0.75).abs() < 1e-12);
        assert!(disc.ray_hit([0.0, 0.0], [-1.0, 0.0]).is_none());
        let square = Obstacle::Polygon {
            vertices: vec![[1.0, -1.0], [2.0, -1.0], [2.0, 1.0], [1.0, 1.0]],
        };
        assert!((square.ray_hit([0.0, 0.0], [1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let s = arena();
        assert!((s.ray_cast([0.5, 0.5], [0.0, 1.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scene_file_round_trip_and_versioning() {
        let s = cluttered();
        let text = s.to_toml();
        assert!(text.contains("format = 1"));
        assert_eq!(Scene::parse(&text).unwrap(), s);
        let v2 = text.replace("format = 1", "format = 2");
        assert!(matches!(
            Scene::parse(&v2),
            Err(SceneError::Format { found: 2 })
        ));
    }

    #[test]
    fn rejects_bad_obstacles() {
        let mut s = arena();
        s.obstacles.push(Obstacle::Disc {
            center: [1.95, 0.5],
            radius: 0.1,
        });
        assert!(s.validate().is_err());
        let mut s = arena();
        s.obstacles.push(Obstacle::Polygon {
            vertices: vec![[0.5, 0.5], [0.7, 0.5], [0.6, 0.55], [0.7, 0.7], [0.5, 0.7]],
        });
        assert!(s.validate().is_err());
    }
}
