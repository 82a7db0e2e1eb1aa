//! Grasp rectangles and their conversion to per-pixel quality supervision.

use std::path::Path;

use crate::error::{Error, Result};

/// Four corners in pixel coordinates `(x, y)`, where pixel `(row, col)` has
/// its center at `(col + 0.5, row + 0.5)`.
///
/// The edge `corners[0] → corners[1]` runs along the gripper-closing axis; the
/// edge `corners[1] → corners[2]` spans the jaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspRect {
    pub corners: [(f64, f64); 4],
}

impl GraspRect {
    pub fn new(corners: [(f64, f64); 4]) -> Self {
        Self { corners }
    }

    pub fn center(&self) -> (f64, f64) {
        let (sx, sy) = self
            .corners
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / 4.0, sy / 4.0)
    }

    /// Extent along the closing axis.
    pub fn length(&self) -> f64 {
        dist(self.corners[0], self.corners[1])
    }

    /// Extent across the jaw.
    pub fn jaw_width(&self) -> f64 {
        dist(self.corners[1], self.corners[2])
    }

    pub fn is_degenerate(&self) -> bool {
        let finite = self.corners.iter().all(|(x, y)| x.is_finite() && y.is_finite());
        !finite || self.length() < 1e-9 || self.jaw_width() < 1e-9
    }

    /// Whether the point lies in the middle third of the rectangle along the
    /// closing axis (and anywhere across the jaw).
    pub fn center_third_contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center();
        let (ux, uy) = unit(self.corners[0], self.corners[1]);
        let (vx, vy) = unit(self.corners[1], self.corners[2]);
        let (dx, dy) = (x - cx, y - cy);
        let along = dx * ux + dy * uy;
        let across = dx * vx + dy * vy;
        along.abs() <= self.length() / 6.0 && across.abs() <= self.jaw_width() / 2.0
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
}

fn unit(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = dist(a, b);
    ((b.0 - a.0) / d, (b.1 - a.1) / d)
}

/// Per-pixel supervision. Only the quality head is modeled.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMaps {
    pub height: usize,
    pub width: usize,
    pub quality: Vec<f64>,
}

/// Rasterizes the center third of each rectangle into a binary quality map.
/// Returns the map and the number of degenerate rectangles skipped.
pub fn rects_to_quality(rects: &[GraspRect], height: usize, width: usize) -> (GroundTruthMaps, usize) {
    let mut quality = vec![0.0; height * width];
    let mut skipped = 0;
    for r in rects {
        if r.is_degenerate() {
            skipped += 1;
            continue;
        }
        let (x0, y0, x1, y1) = r.corners.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        );
        let rows = clamp_range(y0, y1, height);
        let cols = clamp_range(x0, x1, width);
        for yy in rows {
            for xx in cols.clone() {
                if r.center_third_contains(xx as f64 + 0.5, yy as f64 + 0.5) {
                    quality[yy * width + xx] = 1.0;
                }
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} degenerate grasp rectangle(s)");
    }
    (GroundTruthMaps { height, width, quality }, skipped)
}

fn clamp_range(lo: f64, hi: f64, n: usize) -> std::ops::Range<usize> {
    let a = lo.floor().max(0.0) as usize;
    let b = (hi.ceil().max(0.0) as usize).min(n);
    a.min(b)..b
}

/// Parses grasp text: one `x y` pair per line, four lines per rectangle.
/// Rectangles may be separated by blank lines (manifest layout) or be
/// contiguous (Cornell `pcd####cpos.txt`). `NaN` coordinates are kept and
/// later skipped as degenerate.
pub fn parse_grasps(text: &str, path: &Path) -> Result<Vec<GraspRect>> {
    let mut points = Vec::new();
    let mut block_len = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !block_len.is_multiple_of(4) {
                return Err(Error::format(
                    path,
                    format!("line {}: rectangle block with {} corner(s)", lineno + 1, block_len % 4),
                ));
            }
            block_len = 0;
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::format(path, format!("line {}: expected `x y`", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))
        };
        let x = parse(it.next())?;
        let y = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::format(path, format!("line {}: trailing fields", lineno + 1)));
        }
        points.push((x, y));
        block_len += 1;
    }
    if points.len() % 4 != 0 {
        return Err(Error::format(
            path,
            format!("{} corner lines is not a multiple of 4", points.len()),
        ));
    }
    Ok(points
        .chunks_exact(4)
        .map(|c| GraspRect::new([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn read_grasps(path: &Path) -> Result<Vec<GraspRect>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grasps(&text, path)
}

pub fn format_grasps(rects: &[GraspRect]) -> String {
    let mut out = String::new();
    for (i, r) in rects.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (x, y) in r.corners {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    out
}
