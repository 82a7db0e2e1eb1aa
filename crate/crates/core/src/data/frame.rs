//! RGB-D frames and per-frame depth normalization.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::Image;

/// Depth after per-frame min–max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDepth {
    pub depth01: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
    /// Set when every valid pixel had the same depth; `depth01` is then 0.5.
    pub constant: bool,
}

/// Maps valid depths to `[0, 1]` with `(d - d_min) / (d_max - d_min)`.
///
/// Invalid pixels take the value of their nearest valid pixel in 4-connected
/// (city-block) distance before mapping. Ties go to the source reached first
/// by a row-major multi-source breadth-first fill.
pub fn normalize_depth(raw_depth_m: &[f64], valid: &[bool], height: usize, width: usize) -> Result<NormalizedDepth> {
    let n = height * width;
    if raw_depth_m.len() != n || valid.len() != n {
        return Err(Error::Shape(format!(
            "depth/valid lengths {}/{} for {height}x{width}",
            raw_depth_m.len(),
            valid.len()
        )));
    }
    let mut d_min = f64::INFINITY;
    let mut d_max = f64::NEG_INFINITY;
    for (&d, &ok) in raw_depth_m.iter().zip(valid) {
        if ok {
            if !d.is_finite() {
                return Err(Error::NonFinite("valid depth pixel is not finite".into()));
            }
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
    }
    if d_min > d_max {
        return Err(Error::NoValidDepth);
    }

    let filled = inpaint_nearest(raw_depth_m, valid, height, width);
    let constant = d_max <= d_min;
    let depth01 = if constant {
        vec![0.5; n]
    } else {
        let span = d_max - d_min;
        filled.iter().map(|d| ((d - d_min) / span).clamp(0.0, 1.0)).collect()
    };
    Ok(NormalizedDepth {
        depth01,
        d_min,
        d_max,
        constant,
    })
}

fn inpaint_nearest(raw: &[f64], valid: &[bool], height: usize, width: usize) -> Vec<f64> {
    let mut out = raw.to_vec();
    let mut done = valid.to_vec();
    let mut queue: VecDeque<usize> = (0..raw.len()).filter(|&i| valid[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (y, x) = (i / width, i % width);
        let mut visit = |j: usize| {
            if !done[j] {
                done[j] = true;
                out[j] = out[i];
                queue.push_back(j);
            }
        };
        if y > 0 {
            visit(i - width);
        }
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < width {
            visit(i + 1);
        }
        if y + 1 < height {
            visit(i + width);
        }
    }
    out
}

/// Paired RGB and normalized depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame {
    pub rgb: Image,
    pub depth: Image,
    pub depth_min_m: f64,
    pub depth_max_m: f64,
    pub valid: Vec<bool>,
    pub depth_constant: bool,
}

impl RgbdFrame {
    /// Builds a frame from RGB in `[0, 1]` and raw metric depth.
    pub fn from_raw(rgb: Image, raw_depth_m: &[f64], valid: Vec<bool>) -> Result<Self> {
        let (h, w) = rgb.hw();
        let nd = normalize_depth(raw_depth_m, &valid, h, w)?;
        Self::from_normalized(
            rgb,
            Image::from_vec(1, h, w, nd.depth01)?,
            nd.d_min,
            nd.d_max,
            valid,
            nd.constant,
        )
    }

    pub fn from_normalized(
        rgb: Image,
        depth: Image,
        depth_min_m: f64,
        depth_max_m: f64,
        valid: Vec<bool>,
        depth_constant: bool,
    ) -> Result<Self> {
        if rgb.channels() != 3 || depth.channels() != 1 || rgb.hw() != depth.hw() {
            return Err(Error::Shape(format!(
                "rgb {:?} / depth {:?}",
                rgb.shape(),
                depth.shape()
            )));
        }
        if valid.len() != rgb.plane_len() {
            return Err(Error::Shape("valid mask size".into()));
        }
        if !rgb.in_unit_range() || !depth.in_unit_range() {
            return Err(Error::InvalidArgument("frame values must lie in [0, 1]".into()));
        }
        if !depth_constant && depth_min_m >= depth_max_m {
            return Err(Error::InvalidArgument(format!(
                "depth range {depth_min_m}..{depth_max_m} is empty"
            )));
        }
        Ok(Self {
            rgb,
            depth,
            depth_min_m,
            depth_max_m,
            valid,
            depth_constant,
        })
    }

    pub fn height(&self) -> usize {
        self.rgb.height()
    }

    pub fn width(&self) -> usize {
        self.rgb.width()
    }

    pub fn hw(&self) -> (usize, usize) {
        self.rgb.hw()
    }

    /// The 4-channel network input `[r; g; b; d]`.
    pub fn to_input(&self) -> Image {
        Image::concat(&[&self.rgb, &self.depth]).expect("frame planes share a size")
    }

    /// Metric depth in meters reconstructed from the normalized map.
    pub fn depth_m(&self) -> Vec<f64> {
        let span = self.depth_max_m - self.depth_min_m;
        self.depth
            .data()
            .iter()
            .map(|&d| {
                if self.depth_constant {
                    self.depth_min_m
                } else {
                    self.depth_min_m + d * span
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_depth_is_flagged() {
        let nd = normalize_depth(&[1.2; 9], &[true; 9], 3, 3).unwrap();
        assert!(nd.constant);
        assert!(nd.depth01.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn endpoints_map_to_zero_and_one() {
        let nd = normalize_depth(&[0.4, 1.4], &[true, true], 1, 2).unwrap();
        assert_eq!(nd.depth01, vec![0.0, 1.0]);
        assert_eq!((nd.d_min, nd.d_max), (0.4, 1.4));
    }

    #[test]
    fn all_invalid_fails() {
        assert!(matches!(
            normalize_depth(&[0.0; 4], &[false; 4], 2, 2),
            Err(Error::NoValidDepth)
        ));
    }

    #[test]
    fn center_hole_takes_a_neighbor() {
        // Brute-force oracle: the filled value must equal one of the valid
        // pixels at minimal city-block distance.
        let raw: Vec<f64> = (0..25).map(|i| 0.5 + 0.03 * i as f64).collect();
        let mut valid = vec![true; 25];
        valid[12] = false;
        let nd = normalize_depth(&raw, &valid, 5, 5).unwrap();
        let best = (0..25)
            .filter(|&i| valid[i])
            .map(|i| ((i / 5) as i64 - 2).abs() + ((i % 5) as i64 - 2).abs())
            .min()
            .unwrap();
        let candidates: Vec<f64> = (0..25)
            .filter(|&i| valid[i])
            .filter(|&i| ((i / 5) as i64 - 2).abs() + ((i % 5) as i64 - 2).abs() == best)
            .map(|i| nd.depth01[i])
            .collect();
        assert_eq!(best, 1);
        assert_eq!(candidates.len(), 4);
        assert!(candidates.contains(&nd.depth01[12]));
    }

    #[test]
    fn distant_holes_are_filled() {
        let mut valid = vec![false; 20];
        valid[0] = true;
        valid[19] = true;
        let raw: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let nd = normalize_depth(&raw, &valid, 4, 5).unwrap();
        assert_eq!(nd.depth01[1], 0.0);
        assert_eq!(nd.depth01[18], 1.0);
        assert!(nd.depth01.iter().all(|v| *v == 0.0 || *v == 1.0));
    }
}
