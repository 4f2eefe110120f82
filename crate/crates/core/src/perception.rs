//! Synthetic monocular traversability: ground-plane camera geometry, an
//! oracle renderer standing in for the learned classifier, block-wise
//! labeling with flip noise, and boundary reconstruction into the binary
//! image consumed by the planner.
//!
//! Camera frame: `x` right, `y` down, `z` along the optical axis. The
//! camera sits `mount_height` above the head pose origin, pitched down by
//! `mount_pitch`. Continuous pixel coordinates put pixel centers on integers.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;
use crate::scene::Scene;

/// Side of a classification block (pixels).
pub const BLOCK_SIZE: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("camera sees no ground in any image row")]
    NoGroundInView,
    #[error("flip probability {0} outside [0, 0.5)")]
    InvalidFlipProbability(f64),
    #[error("image {width}x{height} is not a whole number of {block}-pixel blocks")]
    BlockMismatch {
        width: usize,
        height: usize,
        block: usize,
    },
    #[error("no ground at bottom-center")]
    NoGroundAtBottomCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Height of the optical center above the ground (m).
    pub mount_height: f64,
    /// Downward tilt of the optical axis (rad).
    pub mount_pitch: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            mount_height: 0.06,
            mount_pitch: 15f64.to_radians(),
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: &str| Err(PerceptionError::InvalidCamera(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("empty resolution");
        }
        if !(self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64)
        {
            return bad("principal point outside the image");
        }
        if !(self.mount_height > 0.0) {
            return bad("mount height must be positive");
        }
        if !(self.mount_pitch.abs() < std::f64::consts::FRAC_PI_2) {
            return bad("pitch must be within (-90, 90) degrees");
        }
        match self.pixel_to_ground(self.cx, (self.height - 1) as f64) {
            Some(p) if p[0] > 0.0 => Ok(()),
            _ => Err(PerceptionError::NoGroundInView),
        }
    }

    /// Continuous image row of the horizon; rows strictly below see ground.
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.fy * self.mount_pitch.tan()
    }

    /// Ground point (head frame: `x` forward, `y` left) seen at `(u, v)`.
    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        let a = (u - self.cx) / self.fx;
        let b = (v - self.cy) / self.fy;
        let (sp, cp) = self.mount_pitch.sin_cos();
        let down = b * cp + sp;
        if down <= 0.0 {
            return None;
        }
        let t = self.mount_height / down;
        Some([t * (cp - b * sp), -t * a])
    }

    /// Image coordinates of a head-frame ground point; `None` behind the camera.
    pub fn ground_to_pixel(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let (sp, cp) = self.mount_pitch.sin_cos();
        let h = self.mount_height;
        let z = p[0] * cp + h * sp;
        if z <= 0.0 {
            return None;
        }
        Some([
            self.cx - self.fx * p[1] / z,
            self.cy + self.fy * (h * cp - p[0] * sp) / z,
        ])
    }

    /// Forward ground distance imaged on the principal column at row `v`.
    pub fn ground_range_at_row(&self, v: f64) -> Option<f64> {
        self.pixel_to_ground(self.cx, v).map(|p| p[0])
    }

    /// Ground-plane depth covered by the block row containing pixel row `v`.
    pub fn block_depth_extent(&self, v: f64) -> f64 {
        let block = (v.max(0.0) as usize / BLOCK_SIZE) * BLOCK_SIZE;
        let near = self.ground_range_at_row(block as f64 + BLOCK_SIZE as f64 - 0.5);
        let far = self.ground_range_at_row(block as f64 - 0.5);
        match (near, far) {
            (Some(n), Some(f)) => f - n,
            _ => f64::INFINITY,
        }
    }
}

/// Binary ground image, row-major, `true` = traversable.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
    pub camera_pose: Pose,
}

impl TraversabilityImage {
    pub fn filled(width: usize, height: usize, value: bool, camera_pose: Pose) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            camera_pose,
        }
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.pixels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.pixels[v * self.width + u] = value;
    }

    pub fn count_true(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// First blocked row scanning up from the bottom of column `u`, `-1`
    /// when the whole column is ground.
    pub fn first_blocked_from_bottom(&self, u: usize) -> i64 {
        (0..self.height)
            .rev()
            .find(|&v| !self.get(u, v))
            .map_or(-1, |v| v as i64)
    }

    /// Binary PGM (P5, maxval 1).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n1\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| p as u8));
        out
    }

    pub fn frame_file_name(cycle: usize) -> String {
        format!("frame_{cycle}.pgm")
    }
}

/// Oracle segmentation of the camera view.
///
/// A pixel is ground when its back-projected ground point lies inside the
/// bounds and no obstacle (modeled as a tall prism) or wall blocks the line
/// of sight to it. Occlusion is tested on the ground projection of the
/// viewing ray, which starts at the camera nadir.
pub fn render_binary_view(
    scene: &Scene,
    head_pose: &Pose,
    cam: &CameraModel,
) -> Result<TraversabilityImage, PerceptionError> {
    cam.validate()?;
    let origin = head_pose.position();
    let horizon = cam.horizon_row();
    let mut img = TraversabilityImage::filled(cam.width, cam.height, false, *head_pose);
    img.pixels
        .par_chunks_mut(cam.width)
        .enumerate()
        .for_each(|(v, row)| {
            if (v as f64) <= horizon {
                return;
            }
            for (u, px) in row.iter_mut().enumerate() {
                let Some(g) = cam.pixel_to_ground(u as f64, v as f64) else {
                    continue;
                };
                let range = g[0].hypot(g[1]);
                if range == 0.0 {
                    *px = scene.point_free(origin);
                    continue;
                }
                let world = head_pose.transform_point(g);
                if !scene.bounds.contains(world) {
                    continue;
                }
                let dir = [
                    (world[0] - origin[0]) / range,
                    (world[1] - origin[1]) / range,
                ];
                *px = scene.ray_cast(origin, dir) > range;
            }
        });
    Ok(img)
}

/// Block labels, row-major, `true` = ground.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    pub cols: usize,
    pub rows: usize,
    pub block_size: usize,
    pub labels: Vec<bool>,
}

impl BlockGrid {
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.labels[row * self.cols + col]
    }

    /// Upsampled to pixels (one PGM pixel per image pixel).
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.cols * self.block_size, self.rows * self.block_size);
        let mut out = format!("P5\n{w} {h}\n1\n").into_bytes();
        for v in 0..h {
            for u in 0..w {
                out.push(self.get(u / self.block_size, v / self.block_size) as u8);
            }
        }
        out
    }
}

/// Majority label per block (ties count as ground), then independent flips.
pub fn classify_blocks(
    img: &TraversabilityImage,
    flip_probability: f64,
    seed: u64,
) -> Result<BlockGrid, PerceptionError> {
    classify_blocks_with(img, flip_probability, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// As [`classify_blocks`], drawing one uniform per block (row-major) from `rng`.
pub fn classify_blocks_with<R: Rng>(
    img: &TraversabilityImage,
    flip_probability: f64,
    rng: &mut R,
) -> Result<BlockGrid, PerceptionError> {
    if !(0.0..0.5).contains(&flip_probability) {
        return Err(PerceptionError::InvalidFlipProbability(flip_probability));
    }
    if !img.width.is_multiple_of(BLOCK_SIZE) || !img.height.is_multiple_of(BLOCK_SIZE) {
        return Err(PerceptionError::BlockMismatch {
            width: img.width,
            height: img.height,
            block: BLOCK_SIZE,
        });
    }
    let (cols, rows) = (img.width / BLOCK_SIZE, img.height / BLOCK_SIZE);
    let mut labels = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let mut ground = 0usize;
            for v in r * BLOCK_SIZE..(r + 1) * BLOCK_SIZE {
                for u in c * BLOCK_SIZE..(c + 1) * BLOCK_SIZE {
                    ground += img.get(u, v) as usize;
                }
            }
            let majority = 2 * ground >= BLOCK_SIZE * BLOCK_SIZE;
            let flip = rng.random::<f64>() < flip_probability;
            labels.push(majority != flip);
        }
    }
    Ok(BlockGrid {
        cols,
        rows,
        block_size: BLOCK_SIZE,
        labels,
    })
}

/// Per-pixel-column boundary row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundBoundary {
    pub boundary_row: Vec<usize>,
}

/// Flood fill (4-connected) from the bottom-center block(s); with an even
/// column count both blocks straddling the center seed the fill.
pub fn extract_boundary(grid: &BlockGrid) -> Result<GroundBoundary, PerceptionError> {
    let (cols, rows) = (grid.cols, grid.rows);
    let bottom = rows - 1;
    let mut seen = vec![false; cols * rows];
    let mut queue = VecDeque::new();
    for c in [(cols - 1) / 2, cols / 2] {
        if grid.get(c, bottom) && !seen[bottom * cols + c] {
            seen[bottom * cols + c] = true;
            queue.push_back((c, bottom));
        }
    }
    if queue.is_empty() {
        return Err(PerceptionError::NoGroundAtBottomCenter);
    }
    while let Some((c, r)) = queue.pop_front() {
        let mut visit = |nc: usize, nr: usize| {
            let k = nr * cols + nc;
            if !seen[k] && grid.labels[k] {
                seen[k] = true;
                queue.push_back((nc, nr));
            }
        };
        if c > 0 {
            visit(c - 1, r);
        }
        if c + 1 < cols {
            visit(c + 1, r);
        }
        if r > 0 {
            visit(c, r - 1);
        }
        if r + 1 < rows {
            visit(c, r + 1);
        }
    }
    let height = rows * grid.block_size;
    let boundary_row = (0..cols * grid.block_size)
        .map(|u| {
            let c = u / grid.block_size;
            (0..rows)
                .find(|&r| seen[r * cols + c])
                .map_or(height - 1, |r| r * grid.block_size)
        })
        .collect();
    Ok(GroundBoundary { boundary_row })
}

/// Column-wise fill: rows strictly below the boundary are ground.
pub fn boundary_to_binary(
    boundary: &GroundBoundary,
    cam: &CameraModel,
    camera_pose: Pose,
) -> TraversabilityImage {
    let mut img = TraversabilityImage::filled(cam.width, cam.height, false, camera_pose);
    for (u, &b) in boundary.boundary_row.iter().enumerate().take(cam.width) {
        for v in (b + 1)..cam.height {
            img.set(u, v, true);
        }
    }
    img
}

/// Full pipeline for one frame: render, classify, reconstruct. A frame
/// without ground at the bottom center comes back fully blocked.
pub fn perceive<R: Rng>(
    scene: &Scene,
    head_pose: &Pose,
    cam: &CameraModel,
    flip_probability: f64,
    rng: &mut R,
) -> Result<PerceivedFrame, PerceptionError> {
    let rendered = render_binary_view(scene, head_pose, cam)?;
    let blocks = classify_blocks_with(&rendered, flip_probability, rng)?;
    let binary = match extract_boundary(&blocks) {
        Ok(boundary) => boundary_to_binary(&boundary, cam, *head_pose),
        Err(PerceptionError::NoGroundAtBottomCenter) => {
            TraversabilityImage::filled(cam.width, cam.height, false, *head_pose)
        }
        Err(e) => return Err(e),
    };
    Ok(PerceivedFrame {
        rendered,
        blocks,
        binary,
    })
}

/// Intermediate products of [`perceive`].
#[derive(Debug, Clone)]
pub struct PerceivedFrame {
    pub rendered: TraversabilityImage,
    pub blocks: BlockGrid,
    pub binary: TraversabilityImage,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Bounds, GoalRegion, Obstacle};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn big_empty() -> Scene {
        Scene {
            bounds: Bounds {
                min: [-1e5, -1e5],
                max: [1e5, 1e5],
            },
            obstacles: vec![],
            goal: GoalRegion {
                center: [10.0, 0.0],
                radius: 0.5,
            },
            start: Pose::identity(),
        }
    }

    #[test]
    fn default_camera_geometry() {
        let cam = CameraModel::default();
        cam.validate().unwrap();
        assert!((cam.horizon_row() - (240.0 - 525.0 * 15f64.to_radians().tan())).abs() < 1e-12);
        let near = cam.ground_range_at_row(479.0).unwrap();
        assert!(near > 0.07 && near < 0.08, "{near}");
    }

    #[test]
    fn rejects_camera_that_sees_no_ground() {
        let cam = CameraModel {
            mount_pitch: -60f64.to_radians(),
            ..CameraModel::default()
        };
        assert_eq!(cam.validate(), Err(PerceptionError::NoGroundInView));
        let cam = CameraModel {
            fx: 0.0,
            ..CameraModel::default()
        };
        assert!(matches!(
            cam.validate(),
            Err(PerceptionError::InvalidCamera(_))
        ));
    }

    #[test]
    fn homography_round_trip_below_horizon() {
        let cam = CameraModel::default();
        let first = cam.horizon_row().floor() as usize + 1;
        let mut worst = 0.0f64;
        for v in first..cam.height {
            for u in (0..cam.width).step_by(7) {
                let g = cam.pixel_to_ground(u as f64, v as f64).unwrap();
                let p = cam.ground_to_pixel(g).unwrap();
                worst = worst
                    .max((p[0] - u as f64).abs())
                    .max((p[1] - v as f64).abs());
            }
        }
        assert!(worst < 0.5, "{worst}");
    }

    #[test]
    fn empty_scene_is_ground_below_horizon() {
        let cam = CameraModel::default();
        let img = render_binary_view(&big_empty(), &Pose::identity(), &cam).unwrap();
        let horizon = cam.horizon_row();
        for v in 0..cam.height {
            for u in 0..cam.width {
                assert_eq!(img.get(u, v), (v as f64) > horizon, "({u},{v})");
            }
        }
    }

    #[test]
    fn centered_disc_is_symmetric_about_cx() {
        let mut scene = big_empty();
        scene.obstacles.push(Obstacle::Disc {
            center: [0.3, 0.0],
            radius: 0.05,
        });
        let cam = CameraModel::default();
        let img = render_binary_view(&scene, &Pose::identity(), &cam).unwrap();
        let v = cam.ground_to_pixel([0.26, 0.0]).unwrap()[1].round() as usize;
        let blocked: Vec<usize> = (0..cam.width).filter(|&u| !img.get(u, v)).collect();
        assert!(!blocked.is_empty());
        let mid = (blocked[0] + blocked[blocked.len() - 1]) as f64 / 2.0;
        assert!((mid - cam.cx).abs() <= 0.5, "{mid}");
    }

    #[test]
    fn pgm_export() {
        let mut img = TraversabilityImage::filled(3, 2, false, Pose::identity());
        img.set(1, 1, true);
        assert_eq!(
            img.to_pgm(),
            b"P5\n3 2\n1\n\x00\x00\x00\x00\x01\x00".to_vec()
        );
        assert_eq!(TraversabilityImage::frame_file_name(12), "frame_12.pgm");
    }

    #[test]
    fn classification_examples() {
        let cam = CameraModel::default();
        let img = TraversabilityImage::filled(640, 480, true, Pose::identity());
        let grid = classify_blocks(&img, 0.0, 1).unwrap();
        assert_eq!((grid.cols, grid.rows), (16, 12));
        assert!(grid.labels.iter().all(|&l| l));

        let mut half = TraversabilityImage::filled(640, 480, false, Pose::identity());
        for v in 0..20 {
            for u in 0..40 {
                half.set(u, v, true);
            }
        }
        let grid = classify_blocks(&half, 0.0, 1).unwrap();
        assert!(grid.get(0, 0), "tie goes to ground");
        assert!(!grid.get(1, 0));
        assert!(classify_blocks(&img, 0.5, 1).is_err());
        let _ = cam;
    }

    #[test]
    fn flip_rate_monte_carlo() {
        let img = TraversabilityImage::filled(640, 480, true, Pose::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut flipped = 0usize;
        let mut total = 0usize;
        while total < 10_000 {
            let grid = classify_blocks_with(&img, 0.1, &mut rng).unwrap();
            flipped += grid.labels.iter().filter(|&&l| !l).count();
            total += grid.labels.len();
        }
        let rate = flipped as f64 / total as f64;
        assert!((rate - 0.1).abs() <= 0.01, "{rate}");
    }

    fn grid_from(cols: usize, rows: usize, mut f: impl FnMut(usize, usize) -> bool) -> BlockGrid {
        let mut labels = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                labels.push(f(c, r));
            }
        }
        BlockGrid {
            cols,
            rows,
            block_size: BLOCK_SIZE,
            labels,
        }
    }

    #[test]
    fn boundary_examples() {
        let all = grid_from(16, 12, |_, _| true);
        let b = extract_boundary(&all).unwrap();
        assert!(b.boundary_row.iter().all(|&r| r == 0));

        let one = grid_from(16, 12, |c, r| !(c == 3 && r == 6));
        let b = extract_boundary(&one).unwrap();
        for (u, &row) in b.boundary_row.iter().enumerate() {
            assert_eq!(row, 0, "column {u}: blocks above stay reachable around it");
        }
        // a wall of obstacle blocks across column 3 below row 6
        let wall = grid_from(16, 12, |c, r| !(c == 3 && r >= 6));
        let b = extract_boundary(&wall).unwrap();
        for (u, &row) in b.boundary_row.iter().enumerate() {
            assert_eq!(row, 0, "column {u}");
        }
        // isolated ground above a full-width band is excluded
        let band = grid_from(16, 12, |_, r| r != 5);
        let b = extract_boundary(&band).unwrap();
        assert!(b.boundary_row.iter().all(|&r| r == 6 * BLOCK_SIZE));

        let blocked = grid_from(16, 12, |c, r| !(r == 11 && (c == 7 || c == 8)));
        assert_eq!(
            extract_boundary(&blocked),
            Err(PerceptionError::NoGroundAtBottomCenter)
        );

        let column = grid_from(16, 12, |c, _| c != 0 && c != 15);
        let b = extract_boundary(&column).unwrap();
        assert_eq!(b.boundary_row[0], 479);
        assert_eq!(b.boundary_row[639], 479);
        assert_eq!(b.boundary_row[40], 0);
    }

    #[test]
    fn fill_examples() {
        let cam = CameraModel::default();
        let top = GroundBoundary {
            boundary_row: vec![0; 640],
        };
        let img = boundary_to_binary(&top, &cam, Pose::identity());
        assert_eq!(img.count_true(), 640 * 479);
        assert!(!img.get(5, 0) && img.get(5, 1));
        let bottom = GroundBoundary {
            boundary_row: vec![479; 640],
        };
        assert_eq!(
            boundary_to_binary(&bottom, &cam, Pose::identity()).count_true(),
            0
        );
    }

    fn bfs_oracle(grid: &BlockGrid) -> Option<Vec<usize>> {
        // breadth-first search over an explicit adjacency list
        let n = grid.cols * grid.rows;
        let id = |c: usize, r: usize| r * grid.cols + c;
        let mut adj = vec![Vec::new(); n];
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                if c + 1 < grid.cols {
                    adj[id(c, r)].push(id(c + 1, r));
                    adj[id(c + 1, r)].push(id(c, r));
                }
                if r + 1 < grid.rows {
                    adj[id(c, r)].push(id(c, r + 1));
                    adj[id(c, r + 1)].push(id(c, r));
                }
            }
        }
        let seeds: Vec<usize> = [7usize, 8]
            .iter()
            .map(|&c| id(c, grid.rows - 1))
            .filter(|&k| grid.labels[k])
            .collect();
        if seeds.is_empty() {
            return None;
        }
        let mut dist = vec![usize::MAX; n];
        let mut frontier = seeds.clone();
        for &s in &seeds {
            dist[s] = 0;
        }
        let mut level = 0;
        while !frontier.is_empty() {
            level += 1;
            let mut next = Vec::new();
            for k in frontier {
                for &m in &adj[k] {
                    if grid.labels[m] && dist[m] == usize::MAX {
                        dist[m] = level;
                        next.push(m);
                    }
                }
            }
            frontier = next;
        }
        let mut rows = vec![479usize; 640];
        for (u, row) in rows.iter_mut().enumerate() {
            let c = u / 40;
            for r in (0..grid.rows).rev() {
                if dist[id(c, r)] != usize::MAX {
                    *row = r * 40;
                }
            }
        }
        Some(rows)
    }

    #[test]
    fn boundary_matches_bfs_oracle_on_random_grids() {
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let density = 0.2 + 0.6 * (seed % 5) as f64 / 4.0;
            let grid = grid_from(16, 12, |_, _| rng.random::<f64>() < density);
            let ours = extract_boundary(&grid).ok().map(|b| b.boundary_row);
            assert_eq!(ours, bfs_oracle(&grid), "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fill_is_row_monotone(rows in proptest::collection::vec(0usize..480, 640)) {
            let cam = CameraModel::default();
            let img = boundary_to_binary(&GroundBoundary { boundary_row: rows }, &cam, Pose::identity());
            for u in 0..640 {
                let mut seen_true = false;
                for v in 0..480 {
                    let p = img.get(u, v);
                    prop_assert!(!(seen_true && !p));
                    seen_true |= p;
                }
            }
        }
    }
}
