//! The adversarial quality patch objective and its pieces.

use super::config::{HdposConfig, TvMode};
use crate::data::PatchPair;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::Mask;
use crate::net::{MapLoss, QualityMap};

const TV_EPS: f64 = 1e-12;

fn check_hw(q: &QualityMap, mask: &Mask) -> Result<()> {
    if q.hw() != mask.hw() {
        return Err(Error::Shape(format!("quality {:?} vs mask {:?}", q.hw(), mask.hw())));
    }
    Ok(())
}

/// Mean of `q` over the set pixels of `mask`.
pub fn mean_in_mask(q: &QualityMap, mask: &Mask) -> Result<f64> {
    check_hw(q, mask)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mask.indices().map(|i| q.values[i]).sum::<f64>() / mask.count() as f64)
}

/// `−mean + α·var` over the mask, with its gradient.
pub fn quality_loss_grad(q: &QualityMap, mask: &Mask, alpha: f64) -> Result<(f64, Vec<f64>)> {
    let mean = mean_in_mask(q, mask)?;
    let n = mask.count() as f64;
    let var = mask.indices().map(|i| (q.values[i] - mean).powi(2)).sum::<f64>() / n;
    let mut g = vec![0.0; q.values.len()];
    for i in mask.indices() {
        g[i] = -1.0 / n + alpha * 2.0 * (q.values[i] - mean) / n;
    }
    Ok((-mean + alpha * var, g))
}

pub fn quality_loss(q: &QualityMap, mask: &Mask, alpha: f64) -> Result<f64> {
    quality_loss_grad(q, mask, alpha).map(|(v, _)| v)
}

/// Row-major first minimum inside and first maximum outside the mask.
fn extremes(q: &QualityMap, mask: &Mask) -> Result<(usize, usize)> {
    check_hw(q, mask)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if mask.is_full() {
        return Err(Error::FullMask);
    }
    let (mut lo, mut hi) = (None::<usize>, None::<usize>);
    for (i, (&v, &inside)) in q.values.iter().zip(mask.bits()).enumerate() {
        if inside {
            if lo.is_none_or(|j| v < q.values[j]) {
                lo = Some(i);
            }
        } else if hi.is_none_or(|j| v > q.values[j]) {
            hi = Some(i);
        }
    }
    Ok((lo.expect("nonempty"), hi.expect("not full")))
}

/// `|min(q inside) − max(q outside)|` with a subgradient.
pub fn difference_loss_grad(q: &QualityMap, mask: &Mask) -> Result<(f64, Vec<f64>)> {
    let (lo, hi) = extremes(q, mask)?;
    let d = q.values[lo] - q.values[hi];
    let s = if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    };
    let mut g = vec![0.0; q.values.len()];
    g[lo] += s;
    g[hi] -= s;
    Ok((d.abs(), g))
}

pub fn difference_loss(q: &QualityMap, mask: &Mask) -> Result<f64> {
    difference_loss_grad(q, mask).map(|(v, _)| v)
}

/// Regularizer of one multi-channel image, channels combined per pixel.
pub fn tv_image_grad(img: &Image, mode: TvMode) -> (f64, Image) {
    let (ch, h, w) = img.shape();
    let n = (h * w) as f64;
    let mut g = Image::zeros(ch, h, w);
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            match mode {
                TvMode::Adjacent => {
                    let mut s = TV_EPS;
                    for c in 0..ch {
                        let v = img.get(c, y, x);
                        let dy = if y + 1 < h { v - img.get(c, y + 1, x) } else { 0.0 };
                        let dx = if x + 1 < w { v - img.get(c, y, x + 1) } else { 0.0 };
                        s += dy * dy + dx * dx;
                    }
                    let r = s.sqrt();
                    total += r;
                    for c in 0..ch {
                        let v = img.get(c, y, x);
                        let k = 1.0 / (n * r);
                        if y + 1 < h {
                            let dy = v - img.get(c, y + 1, x);
                            let i = g.index(c, y, x);
                            g.data_mut()[i] += k * dy;
                            let j = g.index(c, y + 1, x);
                            g.data_mut()[j] -= k * dy;
                        }
                        if x + 1 < w {
                            let dx = v - img.get(c, y, x + 1);
                            let i = g.index(c, y, x);
                            g.data_mut()[i] += k * dx;
                            let j = g.index(c, y, x + 1);
                            g.data_mut()[j] -= k * dx;
                        }
                    }
                }
                TvMode::LiteralEq5 => {
                    let r = (0..ch).map(|c| img.get(c, y, x).powi(2)).sum::<f64>().sqrt();
                    total += r;
                    if r > 0.0 {
                        for c in 0..ch {
                            let i = g.index(c, y, x);
                            g.data_mut()[i] = img.get(c, y, x) / (n * r);
                        }
                    }
                }
            }
        }
    }
    (total / n, g)
}

pub fn tv_image(img: &Image, mode: TvMode) -> f64 {
    tv_image_grad(img, mode).0
}

/// Regularizer summed over both patches, with per-patch gradients.
pub fn tv_loss_grad(p: &PatchPair, mode: TvMode) -> (f64, PatchPair) {
    let (a, ga) = tv_image_grad(&p.rgb, mode);
    let (b, gb) = tv_image_grad(&p.depth, mode);
    (a + b, PatchPair { rgb: ga, depth: gb })
}

pub fn tv_loss(p: &PatchPair, mode: TvMode) -> f64 {
    tv_loss_grad(p, mode).0
}

/// Components of the objective for one frame or averaged over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AqpTerms {
    pub quality: f64,
    pub tv: f64,
    pub difference: f64,
    pub total: f64,
}

impl AqpTerms {
    pub fn combine(quality: f64, tv: f64, difference: f64, beta: f64, gamma: f64) -> Self {
        Self {
            quality,
            tv,
            difference,
            total: quality + beta * tv + gamma * difference,
        }
    }
}

pub fn aqp_loss(q: &QualityMap, mask: &Mask, patches: &PatchPair, cfg: &HdposConfig) -> Result<AqpTerms> {
    Ok(AqpTerms::combine(
        quality_loss(q, mask, cfg.alpha)?,
        tv_loss(patches, cfg.tv_mode),
        difference_loss(q, mask)?,
        cfg.beta,
        cfg.gamma,
    ))
}

/// The map-dependent part `L_q + γ·L_d` for one frame; the regularizer depends
/// only on the patches and is handled separately.
pub struct FrameAqpLoss<'a> {
    pub mask: &'a Mask,
    pub alpha: f64,
    pub gamma: f64,
}

impl FrameAqpLoss<'_> {
    /// `(L_q, L_d, ∂(L_q + γ·L_d)/∂q)`; `L_d` is 0 when the mask leaves no outside.
    pub fn terms(&self, q: &QualityMap) -> Result<(f64, f64, Vec<f64>)> {
        let (lq, mut g) = quality_loss_grad(q, self.mask, self.alpha)?;
        let mut ld = 0.0;
        if self.gamma != 0.0 && !self.mask.is_full() {
            let (v, gd) = difference_loss_grad(q, self.mask)?;
            ld = v;
            g.iter_mut().zip(gd).for_each(|(a, b)| *a += self.gamma * b);
        } else if !self.mask.is_full() {
            ld = difference_loss(q, self.mask)?;
        }
        Ok((lq, ld, g))
    }
}

impl MapLoss for FrameAqpLoss<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        let (lq, ld, g) = self.terms(q)?;
        Ok((lq + self.gamma * ld, g))
    }

    fn active_set(&self, q: &QualityMap) -> Vec<usize> {
        match extremes(q, self.mask) {
            Ok((a, b)) => vec![a, b],
            Err(_) => Vec::new(),
        }
    }
}

pub struct QualityLoss<'a> {
    pub mask: &'a Mask,
    pub alpha: f64,
}

impl MapLoss for QualityLoss<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        quality_loss_grad(q, self.mask, self.alpha)
    }
}

pub struct DifferenceLoss<'a> {
    pub mask: &'a Mask,
}

impl MapLoss for DifferenceLoss<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        difference_loss_grad(q, self.mask)
    }

    fn active_set(&self, q: &QualityMap) -> Vec<usize> {
        match extremes(q, self.mask) {
            Ok((a, b)) => vec![a, b],
            Err(_) => Vec::new(),
        }
    }
}
