//! Per-frame shape adaptation of an inserted patch inside a hand mask, with
//! gradient-level balancing between the RGB and depth modalities and
//! distance-adaptive depth perturbation bounds.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{save_patch_bundle, PatchPair, RgbdFrame, SceneRecord};
use crate::error::{Error, Result};
use crate::hdpos::{composite, mean_in_mask};
use crate::image::Image;
use crate::mask::Mask;
use crate::net::loss::loss_input_grad;
use crate::net::{MapLoss, QualityMap, QualityNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UpdateMode {
    /// `x ← x − δ·w_m·sgn(g_m)` per modality.
    #[default]
    ScaledSign,
    /// `x ← x − δ·g_b / ‖g_b‖∞` with the balanced gradient `g_b`.
    RawGradient,
}

impl UpdateMode {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::ScaledSign => "scaled-sign",
            UpdateMode::RawGradient => "raw-gradient",
        }
    }
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled-sign" => Ok(UpdateMode::ScaledSign),
            "raw-gradient" => Ok(UpdateMode::RawGradient),
            other => Err(Error::InvalidArgument(format!("unknown update mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmbsConfig {
    pub iterations: usize,
    pub lr: f64,
    /// RGB bound; the depth bound grows from it with distance.
    pub epsilon: f64,
    pub lambda: f64,
    pub w_d: f64,
    pub update_mode: UpdateMode,
    /// When false the RGB weight stays 1 (unbalanced baseline).
    pub balance: bool,
}

impl Default for GlmbsConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            lr: 0.008,
            epsilon: 8.0 / 255.0,
            lambda: 1.0,
            w_d: 1.0,
            update_mode: UpdateMode::ScaledSign,
            balance: true,
        }
    }
}

impl GlmbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan()
            || self.epsilon <= 0.0
            || self.lambda.is_nan()
            || self.lambda < 0.0
            || self.iterations == 0
            || self.lr.is_nan()
            || self.lr < 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "need epsilon > 0, lambda ≥ 0, iterations ≥ 1, lr ≥ 0 (got {}, {}, {}, {})",
                self.epsilon, self.lambda, self.iterations, self.lr
            )));
        }
        Ok(())
    }
}

/// Per-modality gradient magnitudes and the weights derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    /// `‖∇_rgb L‖₂ / 3`.
    pub s_rgb: f64,
    pub s_d: f64,
    /// `s_d / s_rgb`; `None` when `s_rgb = 0`.
    pub rho: Option<f64>,
    pub w_rgb: f64,
    pub w_d: f64,
}

impl SensitivityReport {
    pub fn from_grads(g_rgb: &Image, g_d: &Image, w_d: f64) -> Self {
        let s_rgb = g_rgb.l2_norm() / 3.0;
        let s_d = g_d.l2_norm();
        let rho = (s_rgb > 0.0).then(|| s_d / s_rgb);
        if rho.is_none() {
            log::warn!("RGB gradient vanished; sensitivity ratio undefined, RGB weight left at 1");
        }
        Self {
            s_rgb,
            s_d,
            rho,
            w_rgb: rho.unwrap_or(1.0),
            w_d,
        }
    }

    pub fn flagged(&self) -> bool {
        self.rho.is_none()
    }
}

/// `−mean(q)` over the hand mask.
pub struct PqgdLoss<'a> {
    pub mask: &'a Mask,
}

impl MapLoss for PqgdLoss<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        let m = mean_in_mask(q, self.mask)?;
        let k = -1.0 / self.mask.count() as f64;
        let mut g = vec![0.0; q.values.len()];
        self.mask.indices().for_each(|i| g[i] = k);
        Ok((-m, g))
    }
}

pub fn pqgd_loss(q: &QualityMap, hand_mask: &Mask) -> Result<f64> {
    Ok(-mean_in_mask(q, hand_mask)?)
}

/// Whole-image input gradients of the hand-region loss and their report.
pub fn sensitivity_with_grads(
    net: &QualityNet,
    x: &Image,
    hand_mask: &Mask,
    w_d: f64,
) -> Result<(f64, SensitivityReport, Image)> {
    let (v, g) = loss_input_grad(net, x, &PqgdLoss { mask: hand_mask })?;
    let rep = SensitivityReport::from_grads(&g.channels_range(0, 3), &g.channels_range(3, 4), w_d);
    Ok((v, rep, g))
}

pub fn sensitivity(net: &QualityNet, x_dprime: &Image, hand_mask: &Mask) -> Result<SensitivityReport> {
    sensitivity_with_grads(net, x_dprime, hand_mask, 1.0).map(|(_, r, _)| r)
}

/// Outcome of checking `‖w_rgb·g_rgb‖₂/3 = s_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReweightCheck {
    pub skipped: bool,
    pub holds: bool,
    pub rel_err: f64,
}

pub fn reweight_check(g_rgb: &Image, g_d: &Image, report: &SensitivityReport) -> ReweightCheck {
    if report.flagged() {
        return ReweightCheck {
            skipped: true,
            holds: false,
            rel_err: f64::NAN,
        };
    }
    let lhs = report.w_rgb * g_rgb.l2_norm() / 3.0;
    let rhs = g_d.l2_norm();
    let scale = lhs.abs().max(rhs.abs());
    let rel_err = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    ReweightCheck {
        skipped: false,
        holds: rel_err <= 1e-6,
        rel_err,
    }
}

fn bound_map_from(depth01: &Image, depth_constant: bool, cfg: &GlmbsConfig) -> Image {
    let (h, w) = depth01.hw();
    let mut b = Image::filled(4, h, w, cfg.epsilon);
    if !depth_constant {
        for (o, &d) in b.plane_mut(3).iter_mut().zip(depth01.data()) {
            *o = cfg.epsilon * (1.0 + cfg.lambda * d);
        }
    }
    b
}

/// Allowed deviation per channel and pixel: ε for RGB, `ε(1 + λ·d01)` for depth.
pub fn bound_map(frame: &RgbdFrame, cfg: &GlmbsConfig) -> Image {
    bound_map_from(&frame.depth, frame.depth_constant, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    /// Frame with the patch inserted in the hand region.
    pub x_prime: Image,
    /// Refined frame.
    pub x_dprime: Image,
    pub hand_mask: Mask,
    /// Original normalized scene depth, for the distance-adaptive bound.
    pub scene_depth: Image,
    pub depth_constant: bool,
    /// Zeros until the frame has been adapted.
    pub bound_map: Image,
    pub reports: Vec<SensitivityReport>,
    /// Hand-region loss before each iteration and after the last.
    pub loss_trace: Vec<f64>,
}

impl AdaptedFrame {
    pub fn max_deviation(&self) -> f64 {
        self.x_dprime
            .data()
            .iter()
            .zip(self.x_prime.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn insert_patch_in_hand(frame: &RgbdFrame, patches: &PatchPair, hand_mask: &Mask) -> Result<AdaptedFrame> {
    if hand_mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let x_prime = composite(&frame.to_input(), patches, hand_mask)?;
    let (h, w) = frame.hw();
    Ok(AdaptedFrame {
        x_dprime: x_prime.clone(),
        x_prime,
        hand_mask: hand_mask.clone(),
        scene_depth: frame.depth.clone(),
        depth_constant: frame.depth_constant,
        bound_map: Image::zeros(4, h, w),
        reports: Vec::new(),
        loss_trace: Vec::new(),
    })
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn adapt(net: &QualityNet, baseline: &AdaptedFrame, cfg: &GlmbsConfig) -> Result<AdaptedFrame> {
    cfg.validate()?;
    if baseline.hand_mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut out = baseline.clone();
    out.bound_map = bound_map_from(&baseline.scene_depth, baseline.depth_constant, cfg);
    out.reports.clear();
    out.loss_trace.clear();
    let w = out.x_dprime.width();
    let mask_idx: Vec<usize> = out.hand_mask.indices().collect();

    for it in 0..cfg.iterations {
        let (v, mut rep, g) = sensitivity_with_grads(net, &out.x_dprime, &out.hand_mask, cfg.w_d)?;
        if !cfg.balance {
            rep.w_rgb = 1.0;
        }
        out.loss_trace.push(v);
        out.reports.push(rep);
        let weight = |c: usize| if c < 3 { rep.w_rgb } else { rep.w_d };
        let step_scale = match cfg.update_mode {
            UpdateMode::ScaledSign => 1.0,
            UpdateMode::RawGradient => {
                let mut m = 0.0f64;
                for &i in &mask_idx {
                    for c in 0..4 {
                        m = m.max((weight(c) * g.get(c, i / w, i % w)).abs());
                    }
                }
                if m > 0.0 {
                    1.0 / m
                } else {
                    0.0
                }
            }
        };
        for &i in &mask_idx {
            let (y, x) = (i / w, i % w);
            for c in 0..4 {
                let gb = weight(c) * g.get(c, y, x);
                let delta = match cfg.update_mode {
                    UpdateMode::ScaledSign => cfg.lr * weight(c) * sgn(g.get(c, y, x)),
                    UpdateMode::RawGradient => cfg.lr * gb * step_scale,
                };
                let base = out.x_prime.get(c, y, x);
                let b = out.bound_map.get(c, y, x);
                let nv = (out.x_dprime.get(c, y, x) - delta)
                    .clamp(base - b, base + b)
                    .clamp(0.0, 1.0);
                if !nv.is_finite() {
                    return Err(Error::NonFinite(format!("adaptation iteration {}", it + 1)));
                }
                out.x_dprime.set(c, y, x, nv);
            }
        }
    }
    let q = net.forward(&out.x_dprime)?;
    out.loss_trace.push(pqgd_loss(&q, &out.hand_mask)?);
    Ok(out)
}

/// Inserts `patches` into the scene's hand region and adapts it.
pub fn adapt_scene(
    net: &QualityNet,
    scene: &SceneRecord,
    patches: &PatchPair,
    cfg: &GlmbsConfig,
) -> Result<AdaptedFrame> {
    let mask = scene
        .hand_mask
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("scene {} has no hand mask", scene.id)))?;
    adapt(net, &insert_patch_in_hand(&scene.frame, patches, mask)?, cfg)
}

/// Writes `<id>.maqp` (the refined frame in patch-bundle format) and `<id>.txt`.
pub fn save_adapted(dir: &Path, id: &str, frame: &AdaptedFrame, cfg: &GlmbsConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pair = PatchPair::from_stacked(frame.x_dprime.clone())?;
    save_patch_bundle(&dir.join(format!("{id}.maqp")), &pair)?;
    let mut s = String::new();
    let rep = frame.reports.last();
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.9}"));
    let _ = writeln!(s, "rho = {}", fmt(rep.and_then(|r| r.rho)));
    let _ = writeln!(s, "s_rgb = {}", fmt(rep.map(|r| r.s_rgb)));
    let _ = writeln!(s, "s_d = {}", fmt(rep.map(|r| r.s_d)));
    let _ = writeln!(s, "iterations = {}", cfg.iterations);
    let _ = writeln!(s, "update_mode = {}", cfg.update_mode.name());
    let path = dir.join(format!("{id}.txt"));
    std::fs::write(&path, s).map_err(|e| Error::io(path, e))
}
