//! Q-ACC: the fraction of frames whose global quality argmax lies inside the
//! patched region.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{PatchPair, SceneRecord};
use crate::error::{Error, Result};
use crate::glmbs::{adapt, insert_patch_in_hand, GlmbsConfig, SensitivityReport};
use crate::hdpos::{composite, Placement};
use crate::image::Image;
use crate::mask::Mask;
use crate::net::checkpoint::fnv1a64;
use crate::net::{QualityMap, QualityNet};

/// Anything that maps a 4-channel frame to a quality map.
pub trait QualityModel: Sync {
    fn predict(&self, x: &Image) -> Result<QualityMap>;
}

impl QualityModel for QualityNet {
    fn predict(&self, x: &Image) -> Result<QualityMap> {
        self.forward(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PlacementMode {
    /// Seeded random scale and position per scene.
    #[default]
    RandomSeeded,
    /// Into each scene's hand mask; scenes without one are skipped.
    HandMask,
}

impl PlacementMode {
    pub fn name(self) -> &'static str {
        match self {
            PlacementMode::RandomSeeded => "random-seeded",
            PlacementMode::HandMask => "hand-mask",
        }
    }
}

impl std::str::FromStr for PlacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-seeded" => Ok(PlacementMode::RandomSeeded),
            "hand-mask" => Ok(PlacementMode::HandMask),
            other => Err(Error::InvalidArgument(format!("unknown placement mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub placement: PlacementMode,
    pub scale_range: (f64, f64),
    pub seed: u64,
    /// Per-frame shape adaptation before the final forward pass.
    pub adapt: Option<GlmbsConfig>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            placement: PlacementMode::RandomSeeded,
            scale_range: (0.2, 0.5),
            seed: 0,
            adapt: None,
        }
    }
}

impl EvalConfig {
    pub fn hash(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub id: String,
    pub success: bool,
    pub mean_in: f64,
    /// `None` when the region covers the whole frame.
    pub mean_out: Option<f64>,
    pub argmax: (usize, usize),
    /// First-iteration sensitivity when adaptation ran.
    pub report: Option<SensitivityReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub q_acc: f64,
    pub per_scene: Vec<SceneOutcome>,
    pub skipped: Vec<String>,
    pub runtime_mean_s: f64,
}

/// Mean quality inside and outside `mask`.
pub fn region_means(q: &QualityMap, mask: &Mask) -> (f64, Option<f64>) {
    let (mut si, mut so) = (0.0, 0.0);
    for (v, &m) in q.values.iter().zip(mask.bits()) {
        if m {
            si += v;
        } else {
            so += v;
        }
    }
    let n_in = mask.count();
    let n_out = q.values.len() - n_in;
    (si / n_in.max(1) as f64, (n_out > 0).then(|| so / n_out as f64))
}

fn scene_outcome(
    model: &dyn QualityModel,
    scene: &SceneRecord,
    patches: &PatchPair,
    mask: &Mask,
    adapter: Option<(&QualityNet, &GlmbsConfig)>,
) -> Result<(SceneOutcome, f64)> {
    let t0 = Instant::now();
    let (x, report) = match adapter {
        None => (composite(&scene.frame.to_input(), patches, mask)?, None),
        Some((net, cfg)) => {
            let a = adapt(net, &insert_patch_in_hand(&scene.frame, patches, mask)?, cfg)?;
            let r = a.reports.first().copied();
            (a.x_dprime, r)
        }
    };
    let q = model.predict(&x)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let am = q.argmax();
    let (mean_in, mean_out) = region_means(&q, mask);
    Ok((
        SceneOutcome {
            id: scene.id.clone(),
            success: mask.bits()[am],
            mean_in,
            mean_out,
            argmax: (am / q.width, am % q.width),
            report,
        },
        elapsed,
    ))
}

/// Q-ACC of `patches` on `scenes` for an arbitrary model (no adaptation).
pub fn q_acc(
    model: &dyn QualityModel,
    scenes: &[SceneRecord],
    patches: &PatchPair,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    if cfg.adapt.is_some() {
        return Err(Error::InvalidArgument(
            "adaptation needs a differentiable network; use q_acc_net".into(),
        ));
    }
    evaluate(model, None, scenes, patches, cfg)
}

/// Q-ACC with the network, applying per-frame adaptation if configured.
pub fn q_acc_net(
    net: &QualityNet,
    scenes: &[SceneRecord],
    patches: &PatchPair,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    evaluate(net, Some(net), scenes, patches, cfg)
}

fn evaluate(
    model: &dyn QualityModel,
    net: Option<&QualityNet>,
    scenes: &[SceneRecord],
    patches: &PatchPair,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    if scenes.is_empty() {
        return Err(Error::InvalidArgument("no scenes to evaluate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for s in scenes {
        match cfg.placement {
            PlacementMode::RandomSeeded => {
                let p = Placement::sample(&mut rng, s.frame.hw(), patches.canvas_size(), cfg.scale_range)?;
                jobs.push((s, p.mask));
            }
            PlacementMode::HandMask => match &s.hand_mask {
                Some(m) if !m.is_empty() => jobs.push((s, m.clone())),
                _ => {
                    log::warn!("scene {} has no hand mask; skipped", s.id);
                    skipped.push(s.id.clone());
                }
            },
        }
    }
    if jobs.is_empty() {
        return Err(Error::InvalidArgument("every scene was skipped".into()));
    }
    let adapter = match (&cfg.adapt, net) {
        (Some(g), Some(n)) => Some((n, g)),
        _ => None,
    };
    // Warm-up pass, excluded from timing.
    scene_outcome(model, jobs[0].0, patches, &jobs[0].1, adapter)?;
    let results: Vec<(SceneOutcome, f64)> = jobs
        .par_iter()
        .map(|(s, m)| scene_outcome(model, s, patches, m, adapter))
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let runtime_mean_s = (results.iter().map(|r| r.1).sum::<f64>() / n).max(f64::MIN_POSITIVE);
    let per_scene: Vec<SceneOutcome> = results.into_iter().map(|r| r.0).collect();
    let q_acc = per_scene.iter().filter(|s| s.success).count() as f64 / n;
    Ok(EvalResult {
        q_acc,
        per_scene,
        skipped,
        runtime_mean_s,
    })
}

/// Results file text. Runtime is left out so that reruns are byte-identical.
pub fn format_results(result: &EvalResult, cfg: &EvalConfig, seeds: &[(&str, u64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# maqp evaluation results");
    let _ = writeln!(s, "# config_hash = {:#018x}", cfg.hash());
    let seeds: Vec<String> = std::iter::once(("eval", cfg.seed))
        .chain(seeds.iter().copied())
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(s, "# seeds = {}", seeds.join(" "));
    let _ = writeln!(s, "# placement = {}", cfg.placement.name());
    let _ = writeln!(s, "# adapt = {}", cfg.adapt.is_some());
    if !result.skipped.is_empty() {
        let _ = writeln!(s, "# skipped = {}", result.skipped.join(","));
    }
    let _ = writeln!(s, "q_acc = {:.6} ({:.1}%)", result.q_acc, 100.0 * result.q_acc);
    let _ = writeln!(s, "id,success,mean_in,mean_out");
    for r in &result.per_scene {
        let out = r.mean_out.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{},{},{:.6},{}", r.id, u8::from(r.success), r.mean_in, out);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_dataset;

    /// Returns 1 where the input's first channel equals a marker, else 0.
    struct Marker(f64);

    impl QualityModel for Marker {
        fn predict(&self, x: &Image) -> Result<QualityMap> {
            let v = x
                .plane(0)
                .iter()
                .map(|&r| if r == self.0 { 1.0 } else { 0.0 })
                .collect();
            QualityMap::new(x.height(), x.width(), v)
        }
    }

    /// Always peaks at the top-left corner.
    struct Corner;

    impl QualityModel for Corner {
        fn predict(&self, x: &Image) -> Result<QualityMap> {
            let mut v = vec![0.0; x.plane_len()];
            v[0] = 1.0;
            QualityMap::new(x.height(), x.width(), v)
        }
    }

    #[test]
    fn stub_models_give_extreme_scores() {
        let scenes = synth_dataset(0, 6, 64, 64, 2).unwrap();
        let patch = PatchPair::filled(8, 8, 0.123456789, 0.5);
        let cfg = EvalConfig {
            scale_range: (0.2, 0.4),
            ..Default::default()
        };
        let r = q_acc(&Marker(0.123456789), &scenes, &patch, &cfg).unwrap();
        assert_eq!(r.q_acc, 1.0);
        assert!(r.runtime_mean_s > 0.0);
        // Placement starts at row ≥ 0; corner is inside only if the patch
        // covers (0,0), which the oracle checks directly.
        let r = q_acc(&Corner, &scenes, &patch, &EvalConfig { seed: 3, ..cfg.clone() }).unwrap();
        let expect = r.per_scene.iter().filter(|s| s.argmax == (0, 0) && s.success).count();
        assert_eq!((r.q_acc * 6.0).round() as usize, expect);
        let hand = EvalConfig {
            placement: PlacementMode::HandMask,
            ..cfg
        };
        let r = q_acc(&Corner, &scenes, &patch, &hand).unwrap();
        assert_eq!(r.q_acc, 0.0);
    }

    #[test]
    fn missing_hand_masks_are_skipped() {
        let mut scenes = synth_dataset(10, 3, 64, 64, 1).unwrap();
        scenes[1].hand_mask = None;
        let cfg = EvalConfig {
            placement: PlacementMode::HandMask,
            ..Default::default()
        };
        let r = q_acc(&Corner, &scenes, &PatchPair::filled(4, 4, 0.5, 0.5), &cfg).unwrap();
        assert_eq!(r.skipped, vec![scenes[1].id.clone()]);
        assert_eq!(r.per_scene.len(), 2);
        let text = format_results(&r, &cfg, &[]);
        assert!(text.contains("# skipped = synth_000011"));
    }

    #[test]
    fn results_file_layout() {
        let r = EvalResult {
            q_acc: 0.5,
            per_scene: vec![SceneOutcome {
                id: "a".into(),
                success: true,
                mean_in: 0.9,
                mean_out: Some(0.25),
                argmax: (1, 2),
                report: None,
            }],
            skipped: vec![],
            runtime_mean_s: 0.1,
        };
        let t = format_results(&r, &EvalConfig::default(), &[("patch", 7)]);
        assert!(t.contains("# seeds = eval=0 patch=7"));
        assert!(t.contains("q_acc = 0.500000 (50.0%)"));
        assert!(t.ends_with("id,success,mean_in,mean_out\na,1,0.900000,0.250000\n"));
    }
}
