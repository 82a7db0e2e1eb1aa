//! Differentiable patch compositing.
//!
//! The patch canvas is bilinearly resampled onto the mask's bounding box
//! (half-pixel centers, edge clamped) and replaces the frame wherever the
//! mask is set, in all four channels at once.

use crate::data::PatchPair;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::Mask;

/// Per-output-index source taps `(i0, i1, frac)` along one axis.
fn axis_taps(n_src: usize, n_dst: usize) -> Vec<(usize, usize, f64)> {
    (0..n_dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

struct Resampler {
    rows: Vec<(usize, usize, f64)>,
    cols: Vec<(usize, usize, f64)>,
}

impl Resampler {
    fn new(src: (usize, usize), dst: (usize, usize)) -> Self {
        Self {
            rows: axis_taps(src.0, dst.0),
            cols: axis_taps(src.1, dst.1),
        }
    }

    /// The four `(src_y, src_x, weight)` taps of destination pixel `(r, c)`.
    #[inline]
    fn taps(&self, r: usize, c: usize) -> [(usize, usize, f64); 4] {
        let (y0, y1, fy) = self.rows[r];
        let (x0, x1, fx) = self.cols[c];
        [
            (y0, x0, (1.0 - fy) * (1.0 - fx)),
            (y0, x1, (1.0 - fy) * fx),
            (y1, x0, fy * (1.0 - fx)),
            (y1, x1, fy * fx),
        ]
    }
}

/// `x' = x·(1 − M) + resample(p)·M` on the stacked `[rgb; d]` channels.
pub fn composite(frame4: &Image, patches: &PatchPair, mask: &Mask) -> Result<Image> {
    if frame4.channels() != 4 || frame4.hw() != mask.hw() {
        return Err(Error::Shape(format!(
            "frame {:?} with mask {:?}",
            frame4.shape(),
            mask.hw()
        )));
    }
    let mut out = frame4.clone();
    let Some(bb) = mask.bbox() else {
        return Ok(out);
    };
    let rs = Resampler::new(patches.canvas_size(), (bb.height(), bb.width()));
    let planes = [
        patches.rgb.plane(0),
        patches.rgb.plane(1),
        patches.rgb.plane(2),
        patches.depth.plane(0),
    ];
    let pw = patches.canvas_size().1;
    let w = frame4.width();
    for i in mask.indices() {
        let (y, x) = (i / w, i % w);
        let taps = rs.taps(y - bb.top, x - bb.left);
        for (c, plane) in planes.iter().enumerate() {
            let v = taps.iter().map(|&(sy, sx, wt)| wt * plane[sy * pw + sx]).sum();
            out.set(c, y, x, v);
        }
    }
    Ok(out)
}

/// Pulls `∂L/∂x'` back onto the patch canvas (adjoint of [`composite`]).
pub fn composite_backward(grad4: &Image, canvas: (usize, usize), mask: &Mask) -> Result<PatchPair> {
    if grad4.channels() != 4 || grad4.hw() != mask.hw() {
        return Err(Error::Shape("gradient/mask shape".into()));
    }
    let mut g = Image::zeros(4, canvas.0, canvas.1);
    if let Some(bb) = mask.bbox() {
        let rs = Resampler::new(canvas, (bb.height(), bb.width()));
        let w = grad4.width();
        for i in mask.indices() {
            let (y, x) = (i / w, i % w);
            let taps = rs.taps(y - bb.top, x - bb.left);
            for c in 0..4 {
                let gv = grad4.get(c, y, x);
                if gv == 0.0 {
                    continue;
                }
                for &(sy, sx, wt) in &taps {
                    let j = g.index(c, sy, sx);
                    g.data_mut()[j] += wt * gv;
                }
            }
        }
    }
    PatchPair::from_stacked(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Image {
        Image::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn random_patch(rng: &mut ChaCha8Rng, h: usize, w: usize) -> PatchPair {
        PatchPair::new(random_image(rng, 3, h, w), random_image(rng, 1, h, w)).unwrap()
    }

    #[test]
    fn identity_resample_copies_patch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = random_image(&mut rng, 4, 12, 12);
        let p = random_patch(&mut rng, 12, 12);
        let out = composite(&frame, &p, &Mask::full(12, 12)).unwrap();
        assert_eq!(out, p.stacked());
    }

    #[test]
    fn empty_mask_leaves_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame = random_image(&mut rng, 4, 8, 10);
        let p = random_patch(&mut rng, 5, 5);
        assert_eq!(composite(&frame, &p, &Mask::empty(8, 10)).unwrap(), frame);
    }

    #[test]
    fn checkerboard_selects_per_pixel() {
        // Oracle: with a full-bbox checkerboard, the patch sample is the same
        // as under a full mask, so x' = M ? full : frame elementwise.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = random_image(&mut rng, 4, 9, 9);
        let p = random_patch(&mut rng, 4, 6);
        let checker = Mask::from_fn(9, 9, |y, x| (y + x) % 2 == 0);
        assert_eq!(checker.bbox(), Mask::full(9, 9).bbox());
        let under_full = composite(&frame, &p, &Mask::full(9, 9)).unwrap();
        let out = composite(&frame, &p, &checker).unwrap();
        for c in 0..4 {
            for y in 0..9 {
                for x in 0..9 {
                    let expect = if checker.get(y, x) {
                        under_full.get(c, y, x)
                    } else {
                        frame.get(c, y, x)
                    };
                    assert_eq!(out.get(c, y, x), expect);
                }
            }
        }
    }

    #[test]
    fn backward_is_adjoint() {
        // <composite(0, p, M), g> = <p, composite_backward(g)>
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_patch(&mut rng, 7, 5);
        let mask = Mask::from_fn(11, 13, |y, x| y > 2 && x > 1 && (y * x) % 3 != 0);
        let g = random_image(&mut rng, 4, 11, 13);
        let out = composite(&Image::zeros(4, 11, 13), &p, &mask).unwrap();
        let lhs: f64 = out.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let gp = composite_backward(&g, (7, 5), &mask).unwrap();
        let rhs: f64 = p
            .stacked()
            .data()
            .iter()
            .zip(gp.stacked().data())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn taps_stay_in_range() {
        for (s, d) in [(224, 13), (3, 40), (1, 5), (5, 1)] {
            for (i0, i1, f) in axis_taps(s, d) {
                assert!(i0 < s && i1 < s && (0.0..1.0).contains(&f));
            }
        }
    }
}
