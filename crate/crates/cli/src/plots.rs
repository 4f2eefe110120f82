//! Overhead trajectory and curvature-command plots as standalone SVG.

use std::fmt::Write as _;

use serpnav::gait::ReductionMap;
use serpnav::scene::{Obstacle, Scene};
use serpnav::world::EpisodeLog;

const TRUE_COLOR: &str = "#1f5fbf";
const EST_COLOR: &str = "#e07b00";

/// World-to-canvas transform with the y axis pointing up.
struct Frame {
    min: [f64; 2],
    max_y: f64,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        self.margin + (x - self.min[0]) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        self.margin + (self.max_y - y) * self.scale
    }

    fn points(&self, pts: impl Iterator<Item = [f64; 2]>) -> String {
        pts.map(|p| format!("{:.2},{:.2}", self.x(p[0]), self.y(p[1])))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn trajectory_svg(scene: &Scene, log: &EpisodeLog) -> String {
    let b = &scene.bounds;
    let g = &scene.goal;
    // the goal region may reach past the walls
    let lo = [
        b.min[0].min(g.center[0] - g.radius),
        b.min[1].min(g.center[1] - g.radius),
    ];
    let hi = [
        b.max[0].max(g.center[0] + g.radius),
        b.max[1].max(g.center[1] + g.radius),
    ];
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let scale = (900.0 / w).min(600.0 / h);
    let f = Frame {
        min: lo,
        max_y: hi[1],
        scale,
        margin: 30.0,
    };
    let width = w * scale + 60.0;
    let height = h * scale + 90.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f4f4f4" stroke="black"/>"##,
        f.x(b.min[0]),
        f.y(b.max[1]),
        (b.max[0] - b.min[0]) * scale,
        (b.max[1] - b.min[1]) * scale
    );
    for o in &scene.obstacles {
        match o {
            Obstacle::Disc { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#555555"/>"##,
                    f.x(center[0]),
                    f.y(center[1]),
                    radius * scale
                );
            }
            Obstacle::Polygon { vertices } => {
                let _ = writeln!(
                    s,
                    r##"<polygon points="{}" fill="#555555"/>"##,
                    f.points(vertices.iter().copied())
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#2a9d3a" stroke-width="2" stroke-dasharray="6 4"/>"##,
        f.x(g.center[0]),
        f.y(g.center[1]),
        g.radius * scale
    );
    let start = scene.start;
    let tip = [
        start.x + 0.08 * start.theta.cos(),
        start.y + 0.08 * start.theta.sin(),
    ];
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#2a9d3a"/>"##,
        f.x(start.x),
        f.y(start.y)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#2a9d3a" stroke-width="2"/>"##,
        f.x(start.x),
        f.y(start.y),
        f.x(tip[0]),
        f.y(tip[1])
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{EST_COLOR}" stroke-width="2" stroke-dasharray="5 3"/>"#,
        f.points(log.records.iter().map(|r| [r.est_pose.x, r.est_pose.y]))
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{TRUE_COLOR}" stroke-width="2"/>"#,
        f.points(log.records.iter().map(|r| [r.true_pose.x, r.true_pose.y]))
    );
    let ly = h * scale + 60.0;
    legend(&mut s, 30.0, ly, TRUE_COLOR, "true path");
    legend(&mut s, 170.0, ly, EST_COLOR, "estimated path");
    let _ = writeln!(
        s,
        r#"<text x="340" y="{:.0}" font-family="sans-serif" font-size="13">{}, {} cycles</text>"#,
        ly + 4.0,
        log.termination.label(),
        log.records.len()
    );
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String, x: f64, y: f64, color: &str, label: &str) {
    let _ = writeln!(
        s,
        r#"<line x1="{x:.0}" y1="{y:.0}" x2="{:.0}" y2="{y:.0}" stroke="{color}" stroke-width="3"/>"#,
        x + 24.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="13">{label}</text>"#,
        x + 30.0,
        y + 4.0
    );
}

/// Feedforward curvature (the selected arc's own) against the commanded
/// curvature after feedback, per cycle.
pub fn curvature_svg(log: &EpisodeLog, map: &ReductionMap, kappa_max: f64) -> String {
    let (width, height, margin) = (900.0, 360.0, 50.0);
    let n = log.records.len().max(2) as f64 - 1.0;
    let span = kappa_max * 1.15;
    let x = |c: usize| margin + c as f64 / n * (width - 2.0 * margin);
    let y = |k: f64| margin + (span - k) / (2.0 * span) * (height - 2.0 * margin);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{:.0}" viewBox="0 0 {width:.0} {:.0}">"#,
        height + 40.0,
        height + 40.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for k in [-kappa_max, 0.0, kappa_max] {
        let _ = writeln!(
            s,
            r##"<line x1="{margin:.0}" y1="{:.2}" x2="{:.0}" y2="{:.2}" stroke="#bbbbbb"/>"##,
            y(k),
            width - margin,
            y(k)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{k:.1}</text>"#,
            margin - 6.0,
            y(k) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="13" text-anchor="middle">cycle</text>"#,
        width / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.0}" font-family="sans-serif" font-size="13" transform="rotate(-90 14 {:.0})" text-anchor="middle">curvature (1/m)</text>"#,
        height / 2.0,
        height / 2.0
    );
    let ff: Vec<String> = log
        .records
        .iter()
        .map(|r| {
            let k = if r.traj_id < 0 {
                0.0
            } else {
                (r.omega_ff - map.omega_intercept) / map.omega_slope
            };
            format!("{:.2},{:.2}", x(r.cycle), y(k))
        })
        .collect();
    let cmd: Vec<String> = log
        .records
        .iter()
        .map(|r| format!("{:.2},{:.2}", x(r.cycle), y(r.kappa_cmd)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{EST_COLOR}" stroke-width="2" stroke-dasharray="5 3"/>"#,
        ff.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{TRUE_COLOR}" stroke-width="2"/>"#,
        cmd.join(" ")
    );
    legend(&mut s, margin, height + 20.0, EST_COLOR, "feedforward");
    legend(
        &mut s,
        margin + 150.0,
        height + 20.0,
        TRUE_COLOR,
        "commanded",
    );
    s.push_str("</svg>\n");
    s
}
