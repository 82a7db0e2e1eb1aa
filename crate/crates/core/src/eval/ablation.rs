//! Paired comparisons of two configurations on shared seeds.

use std::fmt::Write as _;

use crate::data::{PatchPair, SceneRecord};
use crate::error::{Error, Result};
use crate::glmbs::GlmbsConfig;
use crate::hdpos::{generate_patch, HdposConfig};
use crate::net::QualityNet;

use super::qacc::{q_acc_net, EvalConfig, PlacementMode};

#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    pub label: String,
    pub seeds: Vec<u64>,
    /// Its `seed` is replaced by each arm seed.
    pub hdpos: HdposConfig,
    pub glmbs: Option<GlmbsConfig>,
    pub placement: PlacementMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSeedResult {
    pub q_acc: f64,
    /// Mean sensitivity ratio across frames before reweighting.
    pub rho_before: Option<f64>,
    /// Mean ratio `s_d / (w_rgb·s_rgb)` after reweighting.
    pub rho_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub seed: u64,
    pub a: ArmSeedResult,
    pub b: ArmSeedResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn mean_a(&self) -> f64 {
        self.rows.iter().map(|r| r.a.q_acc).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_b(&self) -> f64 {
        self.rows.iter().map(|r| r.b.q_acc).sum::<f64>() / self.rows.len() as f64
    }

    pub fn format(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed,{a}_qacc,{b}_qacc,{a}_rho,{a}_rho_post,{b}_rho,{b}_rho_post",
            a = self.label_a,
            b = self.label_b
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.1},{:.1},{},{},{},{}",
                r.seed,
                100.0 * r.a.q_acc,
                100.0 * r.b.q_acc,
                opt(r.a.rho_before),
                opt(r.a.rho_after),
                opt(r.b.rho_before),
                opt(r.b.rho_after)
            );
        }
        let _ = writeln!(s, "mean,{:.1},{:.1}", 100.0 * self.mean_a(), 100.0 * self.mean_b());
        s
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Generated patches keyed by their full configuration, so that arms and
/// ablations sharing a patch configuration optimize it once.
#[derive(Debug, Default)]
pub struct PatchCache(Vec<(HdposConfig, PatchPair)>);

impl PatchCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&mut self, net: &QualityNet, train: &[SceneRecord], cfg: &HdposConfig) -> Result<PatchPair> {
        if let Some((_, p)) = self.0.iter().find(|(c, _)| c == cfg) {
            return Ok(p.clone());
        }
        let p = generate_patch(net, train, cfg)?.patches;
        self.0.push((cfg.clone(), p.clone()));
        Ok(p)
    }
}

fn run_arm(
    net: &QualityNet,
    train: &[SceneRecord],
    test: &[SceneRecord],
    arm: &ArmConfig,
    seed: u64,
    cache: &mut PatchCache,
) -> Result<ArmSeedResult> {
    let hcfg = HdposConfig {
        seed,
        ..arm.hdpos.clone()
    };
    let patches = cache.get(net, train, &hcfg)?;
    let ecfg = EvalConfig {
        placement: arm.placement,
        scale_range: hcfg.scale_range,
        seed,
        adapt: arm.glmbs.clone(),
    };
    let r = q_acc_net(net, test, &patches, &ecfg)?;
    let reports: Vec<_> = r.per_scene.iter().filter_map(|s| s.report).collect();
    Ok(ArmSeedResult {
        q_acc: r.q_acc,
        rho_before: mean(reports.iter().filter_map(|r| r.rho)),
        rho_after: mean(
            reports
                .iter()
                .filter(|r| r.s_rgb > 0.0)
                .map(|r| r.s_d / (r.w_rgb * r.s_rgb)),
        ),
    })
}

/// Runs both arms on every shared seed; arms must list the same seeds.
pub fn ablation_run(
    net: &QualityNet,
    train: &[SceneRecord],
    test: &[SceneRecord],
    arm_a: &ArmConfig,
    arm_b: &ArmConfig,
) -> Result<AblationTable> {
    ablation_run_cached(net, train, test, arm_a, arm_b, &mut PatchCache::new())
}

/// [`ablation_run`] reusing patches from `cache`.
pub fn ablation_run_cached(
    net: &QualityNet,
    train: &[SceneRecord],
    test: &[SceneRecord],
    arm_a: &ArmConfig,
    arm_b: &ArmConfig,
    cache: &mut PatchCache,
) -> Result<AblationTable> {
    if arm_a.seeds != arm_b.seeds {
        return Err(Error::InvalidArgument(format!(
            "arm seeds differ: {:?} vs {:?}",
            arm_a.seeds, arm_b.seeds
        )));
    }
    if arm_a.seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds".into()));
    }
    let rows = arm_a
        .seeds
        .iter()
        .map(|&seed| {
            Ok(AblationRow {
                seed,
                a: run_arm(net, train, test, arm_a, seed, cache)?,
                b: run_arm(net, train, test, arm_b, seed, cache)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AblationTable {
        label_a: arm_a.label.clone(),
        label_b: arm_b.label.clone(),
        rows,
    })
}
