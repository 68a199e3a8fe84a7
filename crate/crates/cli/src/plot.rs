//! Static SVG rendering of trajectories and box sets.
//!
//! Output is plain text assembled with fixed-precision formatting, so a
//! given input always produces identical bytes.

use anyhow::{bail, Result};
use std::f64::consts::PI;

use cascade_core::chainrec::BoxCover;
use cascade_core::dynamics::Trajectory;
use cascade_core::geometry::{Factor, SpaceSpec};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 40.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN);
        let sy = HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN);
        (sx, sy)
    }
}

fn axis_range(space: &SpaceSpec, axis: usize, values: impl Iterator<Item = f64>) -> (f64, f64) {
    match space.factors()[axis] {
        Factor::Circle => (-PI, PI),
        Factor::Line => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !lo.is_finite() || !hi.is_finite() {
                return (-1.0, 1.0);
            }
            let pad = 0.05 * (hi - lo).max(1e-6);
            (lo - pad, hi + pad)
        }
    }
}

fn check_axes(dim: usize, axes: (usize, usize)) -> Result<()> {
    if axes.0 >= dim || axes.1 >= dim || axes.0 == axes.1 {
        bail!(
            "projection axes ({}, {}) invalid for a {dim}-dimensional space",
            axes.0,
            axes.1
        );
    }
    Ok(())
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )
}

/// Trajectory projected to two chart axes. Circle-axis jumps larger than pi
/// break the polyline, so wraparound never draws spurious horizontal lines.
pub fn trajectory_svg(traj: &Trajectory, space: &SpaceSpec, axes: (usize, usize)) -> Result<String> {
    check_axes(space.dim(), axes)?;
    let (ax, ay) = axes;
    let frame = Frame {
        x_lo: axis_range(space, ax, traj.points.iter().map(|p| p.0[ax])).0,
        x_hi: axis_range(space, ax, traj.points.iter().map(|p| p.0[ax])).1,
        y_lo: axis_range(space, ay, traj.points.iter().map(|p| p.0[ay])).0,
        y_hi: axis_range(space, ay, traj.points.iter().map(|p| p.0[ay])).1,
    };

    let mut svg = header();
    let mut segment: Vec<(f64, f64)> = Vec::new();
    let flush = |seg: &mut Vec<(f64, f64)>, svg: &mut String| {
        if seg.len() >= 2 {
            let pts: Vec<String> = seg
                .iter()
                .map(|(x, y)| format!("{x:.3},{y:.3}"))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>\n",
                pts.join(" ")
            ));
        }
        seg.clear();
    };

    let mut prev: Option<(f64, f64)> = None;
    for p in &traj.points {
        let (cx, cy) = (p.0[ax], p.0[ay]);
        if let Some((px, py)) = prev {
            let jump_x = space.factors()[ax] == Factor::Circle && (cx - px).abs() > PI;
            let jump_y = space.factors()[ay] == Factor::Circle && (cy - py).abs() > PI;
            if jump_x || jump_y {
                flush(&mut segment, &mut svg);
            }
        }
        segment.push(frame.map(cx, cy));
        prev = Some((cx, cy));
    }
    flush(&mut segment, &mut svg);

    if let Some(p) = traj.points.first() {
        let (sx, sy) = frame.map(p.0[ax], p.0[ay]);
        svg.push_str(&format!(
            "<circle cx=\"{sx:.3}\" cy=\"{sy:.3}\" r=\"3\" fill=\"#2ca02c\"/>\n"
        ));
    }
    if let Some(p) = traj.points.last() {
        let (sx, sy) = frame.map(p.0[ax], p.0[ay]);
        svg.push_str(&format!(
            "<circle cx=\"{sx:.3}\" cy=\"{sy:.3}\" r=\"3\" fill=\"#d62728\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Box set (for example the recurrent boxes of a cover) as filled rectangles.
pub fn boxes_svg(cover: &BoxCover, ids: &[usize], axes: (usize, usize)) -> Result<String> {
    let space = cover.space();
    check_axes(space.dim(), axes)?;
    let (ax, ay) = axes;
    let frame = Frame {
        x_lo: axis_range(space, ax, ids.iter().map(|&i| cover.center(i).0[ax])).0,
        x_hi: axis_range(space, ax, ids.iter().map(|&i| cover.center(i).0[ax])).1,
        y_lo: axis_range(space, ay, ids.iter().map(|&i| cover.center(i).0[ay])).0,
        y_hi: axis_range(space, ay, ids.iter().map(|&i| cover.center(i).0[ay])).1,
    };
    let half = cover.half_widths();
    let mut svg = header();
    for &id in ids {
        let c = cover.center(id);
        let (x0, y0) = frame.map(c.0[ax] - half[ax], c.0[ay] + half[ay]);
        let (x1, y1) = frame.map(c.0[ax] + half[ax], c.0[ay] - half[ay]);
        svg.push_str(&format!(
            "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"{:.3}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.6\" stroke=\"none\"/>\n",
            x1 - x0,
            y1 - y0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cascade_core::dynamics::IntegratorStats;
    use cascade_core::geometry::PointCoords;

    fn cylinder() -> SpaceSpec {
        SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line])
    }

    #[test]
    fn wraparound_breaks_the_polyline() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0],
            points: vec![
                PointCoords(vec![3.0, 0.0]),
                PointCoords(vec![-3.0, 0.1]),
                PointCoords(vec![-2.5, 0.2]),
                PointCoords(vec![-2.0, 0.3]),
            ],
            stats: IntegratorStats::default(),
        };
        let svg = trajectory_svg(&traj, &cylinder(), (0, 1)).unwrap();
        // The jump from 3.0 to -3.0 splits the curve: one polyline of three
        // points remains, the single leading point is dropped.
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn empty_trajectory_renders_an_empty_plot() {
        let traj = Trajectory {
            times: vec![],
            points: vec![],
            stats: IntegratorStats::default(),
        };
        let svg = trajectory_svg(&traj, &cylinder(), (0, 1)).unwrap();
        assert!(svg.contains("<svg"));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn bad_axes_are_rejected() {
        let traj = Trajectory {
            times: vec![],
            points: vec![],
            stats: IntegratorStats::default(),
        };
        assert!(trajectory_svg(&traj, &cylinder(), (0, 5)).is_err());
        assert!(trajectory_svg(&traj, &cylinder(), (1, 1)).is_err());
    }

    #[test]
    fn output_is_deterministic() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            points: vec![PointCoords(vec![0.1, 0.2]), PointCoords(vec![0.3, 0.4])],
            stats: IntegratorStats::default(),
        };
        let a = trajectory_svg(&traj, &cylinder(), (0, 1)).unwrap();
        let b = trajectory_svg(&traj, &cylinder(), (0, 1)).unwrap();
        assert_eq!(a, b);
    }
}
