//! Patch initialization and the joint optimization loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::compose::{composite, composite_backward};
use super::config::{DepthInit, HdposConfig};
use super::loss::{mean_in_mask, tv_loss_grad, AqpTerms, FrameAqpLoss};
use super::placement::Placement;
use crate::data::{PatchPair, SceneRecord};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::net::QualityNet;
use crate::optim::Adam;

/// One optimizer step of the loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// 1-based.
    pub epoch: usize,
    /// 1-based within the epoch.
    pub batch: usize,
    pub terms: AqpTerms,
}

pub const TRACE_HEADER: &str = "epoch,batch,L_q,L_tv,L_d,L_aqp";

pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let t = r.terms;
        s.push_str(&format!(
            "{},{},{:.9},{:.9},{:.9},{:.9}\n",
            r.epoch, r.batch, t.quality, t.tv, t.difference, t.total
        ));
    }
    s
}

/// How the patch is positioned in each training frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PlacementPolicy {
    /// A fresh random placement per frame per step.
    #[default]
    Random,
    /// One frozen placement per training scene, by index.
    Fixed(Vec<Placement>),
}

#[derive(Debug, Clone)]
pub struct HdposOutcome {
    pub patches: PatchPair,
    pub trace: Vec<TraceRow>,
    /// `(‖∂L/∂p_rgb‖₂, ‖∂L/∂p_d‖₂)` per step.
    pub grad_norms: Vec<(f64, f64)>,
}

/// `p_rgb ~ U(0,1)`; `p_d` from the configured depth initialization.
pub fn init_patches(cfg: &HdposConfig, hp: usize, wp: usize) -> Result<PatchPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_with(&mut rng, cfg, hp, wp)
}

fn init_with(rng: &mut ChaCha8Rng, cfg: &HdposConfig, hp: usize, wp: usize) -> Result<PatchPair> {
    cfg.validate()?;
    let rgb: Vec<f64> = (0..3 * hp * wp).map(|_| rng.random_range(0.0..1.0)).collect();
    let depth: Vec<f64> = match cfg.depth_init {
        DepthInit::Gaussian => {
            let n = Normal::new(cfg.mu_p, cfg.sigma_p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (0..hp * wp).map(|_| n.sample(rng).clamp(0.0, 1.0)).collect()
        }
        DepthInit::Uniform => (0..hp * wp).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    PatchPair::new(Image::from_vec(3, hp, wp, rgb)?, Image::from_vec(1, hp, wp, depth)?)
}

/// Mean in-mask quality of a patched frame.
pub fn patched_quality(
    net: &QualityNet,
    scene: &SceneRecord,
    patches: &PatchPair,
    placement: &Placement,
) -> Result<f64> {
    let x = composite(&scene.frame.to_input(), patches, &placement.mask)?;
    mean_in_mask(&net.forward(&x)?, &placement.mask)
}

struct FrameGrad {
    quality: f64,
    difference: f64,
    grad: Image,
}

fn frame_grad(
    net: &QualityNet,
    scene: &SceneRecord,
    patches: &PatchPair,
    placement: &Placement,
    cfg: &HdposConfig,
    weight: f64,
) -> Result<FrameGrad> {
    let x = composite(&scene.frame.to_input(), patches, &placement.mask)?;
    let (q, cache) = net.forward_cached(&x)?;
    let loss = FrameAqpLoss {
        mask: &placement.mask,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
    };
    let (lq, ld, mut dq) = loss.terms(&q)?;
    dq.iter_mut().for_each(|g| *g *= weight);
    let (_, gx) = net.backward(&cache, &dq, false)?;
    Ok(FrameGrad {
        quality: lq,
        difference: ld,
        grad: composite_backward(&gx, patches.canvas_size(), &placement.mask)?.stacked(),
    })
}

pub fn generate_patch(net: &QualityNet, train: &[SceneRecord], cfg: &HdposConfig) -> Result<HdposOutcome> {
    generate_patch_with(net, train, cfg, &PlacementPolicy::Random)
}

pub fn generate_patch_with(
    net: &QualityNet,
    train: &[SceneRecord],
    cfg: &HdposConfig,
    policy: &PlacementPolicy,
) -> Result<HdposOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let PlacementPolicy::Fixed(p) = policy {
        if p.len() != train.len() {
            return Err(Error::InvalidArgument(format!(
                "{} fixed placements for {} scenes",
                p.len(),
                train.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (hp, wp) = cfg.canvas;
    let mut patches = init_with(&mut rng, cfg, hp, wp)?;
    let mut params = patches.stacked().into_vec();
    let mut opt = Adam::new(params.len(), cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::new();
    let mut grad_norms = Vec::new();

    for epoch in 0..cfg.epochs {
        opt.lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let placements: Vec<Placement> = match policy {
                PlacementPolicy::Random => chunk
                    .iter()
                    .map(|&i| Placement::sample(&mut rng, train[i].frame.hw(), cfg.canvas, cfg.scale_range))
                    .collect::<Result<_>>()?,
                PlacementPolicy::Fixed(p) => chunk.iter().map(|&i| p[i].clone()).collect(),
            };
            let weight = 1.0 / chunk.len() as f64;
            let frames: Vec<FrameGrad> = chunk
                .par_iter()
                .zip(placements.par_iter())
                .map(|(&i, pl)| frame_grad(net, &train[i], &patches, pl, cfg, weight))
                .collect::<Result<_>>()
                .map_err(|e| match e {
                    Error::NonFinite(m) => {
                        Error::NonFinite(format!("patch loss at epoch {}, batch {}: {m}", epoch + 1, b + 1))
                    }
                    e => e,
                })?;

            let (tv, tv_grad) = tv_loss_grad(&patches, cfg.tv_mode);
            let mut grad = tv_grad.stacked().into_vec();
            grad.iter_mut().for_each(|g| *g *= cfg.beta);
            let (mut lq, mut ld) = (0.0, 0.0);
            for f in &frames {
                lq += f.quality * weight;
                ld += f.difference * weight;
                grad.iter_mut().zip(f.grad.data()).for_each(|(a, b)| *a += b);
            }
            let terms = AqpTerms::combine(lq, tv, ld, cfg.beta, cfg.gamma);
            if !terms.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "patch loss at epoch {}, batch {}",
                    epoch + 1,
                    b + 1
                )));
            }
            let plane = hp * wp;
            let norm = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
            grad_norms.push((norm(&grad[..3 * plane]), norm(&grad[3 * plane..])));
            trace.push(TraceRow {
                epoch: epoch + 1,
                batch: b + 1,
                terms,
            });

            opt.step(&mut params, &grad);
            params.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            patches = PatchPair::from_stacked(Image::from_vec(4, hp, wp, params.clone())?)?;
            debug_assert!(patches.in_unit_range());
        }
        if let Some(last) = trace.last() {
            log::debug!("patch epoch {}: L_aqp {:.5}", epoch + 1, last.terms.total);
        }
    }
    Ok(HdposOutcome {
        patches,
        trace,
        grad_norms,
    })
}

/// Mean of the per-step totals within each epoch.
pub fn epoch_means(trace: &[TraceRow]) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for r in trace {
        if out.len() < r.epoch {
            out.resize(r.epoch, (0.0, 0));
        }
        let e = &mut out[r.epoch - 1];
        e.0 += r.terms.total;
        e.1 += 1;
    }
    out.into_iter()
        .map(|(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
        .collect()
}
