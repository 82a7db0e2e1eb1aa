//! Seeded synthetic tabletop scenes for dataset-free runs.
//!
//! A gently tilted background plane carries superellipse objects with domed
//! height profiles and distinct colors. Each object gets one grasp rectangle
//! across its minor axis. A skin-colored elliptical "hand" is optionally
//! placed first and kept clear of the objects; it carries no grasp label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::SceneRecord;
use super::frame::RgbdFrame;
use super::grasp::GraspRect;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::Mask;

pub const MIN_SIDE: usize = 64;
const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub with_hand: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { with_hand: true }
    }
}

/// Synthesizes one scene with a hand mask.
pub fn synth_scene(seed: u64, height: usize, width: usize, n_objects: usize) -> Result<SceneRecord> {
    synth_scene_with(seed, height, width, n_objects, SynthOptions::default())
}

pub fn synth_scene_with(
    seed: u64,
    height: usize,
    width: usize,
    n_objects: usize,
    opts: SynthOptions,
) -> Result<SceneRecord> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::InvalidArgument(format!(
            "synthetic scenes need at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = height.min(width) as f64;
    let (hf, wf) = (height as f64, width as f64);

    let base = rng.random_range(0.65..0.75);
    let tilt_x = rng.random_range(-0.02f64..0.02);
    let tilt_y = rng.random_range(-0.02f64..0.02);
    let mut depth: Vec<f64> = (0..height * width)
        .map(|i| {
            let (y, x) = ((i / width) as f64, (i % width) as f64);
            base + tilt_x * ((x + 0.5) / wf - 0.5) + tilt_y * ((y + 0.5) / hf - 0.5)
        })
        .collect();
    let bg = [
        rng.random_range(0.45..0.6),
        rng.random_range(0.42..0.55),
        rng.random_range(0.38..0.5),
    ];
    let mut rgb = Image::zeros(3, height, width);
    for (c, base) in bg.iter().enumerate() {
        for v in rgb.plane_mut(c) {
            *v = (base + rng.random_range(-0.03f64..0.03)).clamp(0.0, 1.0);
        }
    }

    // (cx, cy, radius) of everything placed so far.
    let mut occupied: Vec<(f64, f64, f64)> = Vec::new();
    let fits = |cx: f64, cy: f64, r: f64, occ: &[(f64, f64, f64)]| {
        cx - r >= 0.0
            && cy - r >= 0.0
            && cx + r <= wf
            && cy + r <= hf
            && occ
                .iter()
                .all(|&(ox, oy, or)| ((cx - ox).powi(2) + (cy - oy).powi(2)).sqrt() > r + or + 1.0)
    };

    let mut hand_mask = None;
    if opts.with_hand {
        let a = rng.random_range(0.14..0.2) * side;
        let b = rng.random_range(0.08..0.12) * side;
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cx = rng.random_range(0.0..wf);
            let cy = rng.random_range(0.0..hf);
            if !fits(cx, cy, a + 1.0, &occupied) {
                continue;
            }
            let mask = Mask::ellipse(height, width, (cx, cy), (a, b), theta);
            let lift = rng.random_range(0.04..0.06);
            let skin = [0.87, 0.68, 0.58];
            let (s, co) = theta.sin_cos();
            for i in mask.indices() {
                let (y, x) = ((i / width) as f64 + 0.5, (i % width) as f64 + 0.5);
                let (dx, dy) = (x - cx, y - cy);
                let u = (dx * co + dy * s) / a;
                let v = (-dx * s + dy * co) / b;
                let r2 = (u * u + v * v).min(1.0);
                depth[i] -= lift * (1.0 - r2).sqrt();
                for (c, tone) in skin.iter().enumerate() {
                    rgb.plane_mut(c)[i] = (tone + rng.random_range(-0.02f64..0.02)).clamp(0.0, 1.0);
                }
            }
            occupied.push((cx, cy, a + 1.0));
            hand_mask = Some(mask);
            break;
        }
        if hand_mask.is_none() {
            log::warn!("seed {seed}: hand could not be placed");
        }
    }

    let mut grasps = Vec::new();
    for k in 0..n_objects {
        let a = rng.random_range(0.09..0.16) * side;
        let b = rng.random_range(0.05..0.08) * side;
        let exponent = rng.random_range(2.0..4.0);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let lift = rng.random_range(0.03..0.08);
        let hue = (k as f64 * 0.618_033_988_75 + rng.random_range(0.0..0.2)) % 1.0;
        let color = hsv_to_rgb(hue, 0.8, 0.9);
        let radius = a.max((1.5 * b).hypot(0.6 * a)) + 1.0;
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cx = rng.random_range(0.0..wf);
            let cy = rng.random_range(0.0..hf);
            if !fits(cx, cy, radius, &occupied) {
                continue;
            }
            let (s, co) = theta.sin_cos();
            for y in 0..height {
                for x in 0..width {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    let u = (dx * co + dy * s) / a;
                    let v = (-dx * s + dy * co) / b;
                    let f = u.abs().powf(exponent) + v.abs().powf(exponent);
                    if f <= 1.0 {
                        let i = y * width + x;
                        depth[i] -= lift * (1.0 - f).sqrt();
                        let shade = 0.85 + 0.15 * (1.0 - f);
                        for (c, tone) in color.iter().enumerate() {
                            rgb.plane_mut(c)[i] = (tone * shade).clamp(0.0, 1.0);
                        }
                    }
                }
            }
            // Closing axis along the minor axis, jaw along the major axis.
            let major = (co, s);
            let minor = (-s, co);
            let half_len = 1.5 * b;
            let half_jaw = 0.6 * a;
            let p0 = (
                cx - half_len * minor.0 - half_jaw * major.0,
                cy - half_len * minor.1 - half_jaw * major.1,
            );
            let p1 = (
                cx + half_len * minor.0 - half_jaw * major.0,
                cy + half_len * minor.1 - half_jaw * major.1,
            );
            let p2 = (p1.0 + 2.0 * half_jaw * major.0, p1.1 + 2.0 * half_jaw * major.1);
            let p3 = (p0.0 + 2.0 * half_jaw * major.0, p0.1 + 2.0 * half_jaw * major.1);
            grasps.push(GraspRect::new([p0, p1, p2, p3]));
            occupied.push((cx, cy, radius));
            placed = true;
            break;
        }
        if !placed {
            log::warn!("seed {seed}: object {k} could not be placed after {PLACEMENT_ATTEMPTS} attempts");
        }
    }
    if grasps.len() < n_objects {
        log::warn!("seed {seed}: placed {} of {n_objects} objects", grasps.len());
    }

    let frame = RgbdFrame::from_raw(rgb, &depth, vec![true; height * width])?;
    SceneRecord::new(format!("synth_{seed:06}"), frame, grasps, hand_mask)
}

/// Scenes for seeds `first_seed..first_seed + count`.
pub fn synth_dataset(
    first_seed: u64,
    count: usize,
    height: usize,
    width: usize,
    n_objects: usize,
) -> Result<Vec<SceneRecord>> {
    (0..count as u64)
        .map(|i| synth_scene(first_seed + i, height, width, n_objects))
        .collect()
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    match i as i64 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::grasp::rects_to_quality;

    #[test]
    fn no_objects_no_grasps() {
        let s = synth_scene(5, 64, 64, 0).unwrap();
        assert!(s.grasps.is_empty());
        assert!(s.gt.quality.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_scene(3, 64, 80, 3).unwrap(), synth_scene(3, 64, 80, 3).unwrap());
        assert_ne!(synth_scene(3, 64, 64, 3).unwrap(), synth_scene(4, 64, 64, 3).unwrap());
    }

    #[test]
    fn quality_mass_matches_per_rect_areas() {
        for seed in 0..10 {
            let s = synth_scene(seed, 64, 64, 3).unwrap();
            assert!(!s.grasps.is_empty(), "seed {seed}");
            let total: f64 = s.gt.quality.iter().sum();
            // Independent oracle: count pixel centers inside each center third.
            let mut expected = 0usize;
            for r in &s.grasps {
                let (cx, cy) = r.center();
                let (ux, uy) = {
                    let (a, b) = (r.corners[0], r.corners[1]);
                    let d = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                    ((b.0 - a.0) / d, (b.1 - a.1) / d)
                };
                let len = r.length();
                let jaw = r.jaw_width();
                for y in 0..64 {
                    for x in 0..64 {
                        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                        let along = dx * ux + dy * uy;
                        let across = -dx * uy + dy * ux;
                        if along.abs() <= len / 6.0 && across.abs() <= jaw / 2.0 {
                            expected += 1;
                        }
                    }
                }
            }
            assert_eq!(total as usize, expected, "seed {seed}");
        }
    }

    #[test]
    fn self_consistent_with_rasterizer() {
        let s = synth_scene(11, 72, 64, 4).unwrap();
        let (gt, skipped) = rects_to_quality(&s.grasps, 72, 64);
        assert_eq!(skipped, 0);
        assert_eq!(gt, s.gt);
    }

    #[test]
    fn hand_is_present_and_unlabelled() {
        let s = synth_scene(2, 64, 64, 2).unwrap();
        let hand = s.hand_mask.as_ref().expect("hand placed");
        assert!(hand.count() > 20);
        for i in hand.indices() {
            assert_eq!(s.gt.quality[i], 0.0);
        }
    }

    #[test]
    fn crowded_scene_places_fewer() {
        let s = synth_scene(1, 64, 64, 40).unwrap();
        assert!(s.grasps.len() < 40);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(synth_scene(0, 32, 64, 1).is_err());
    }
}
