//! Q-ACC evaluation, ablation comparisons, and heatmap rendering.

pub mod ablation;
pub mod heatmap;
pub mod qacc;

pub use ablation::{
    ablation_run, ablation_run_cached, AblationRow, AblationTable, ArmConfig, ArmSeedResult, PatchCache,
};
pub use heatmap::{colormap, heatmap_image, render_heatmap, render_heatmap_with, MARKER};
pub use qacc::{
    format_results, q_acc, q_acc_net, region_means, EvalConfig, EvalResult, PlacementMode, QualityModel, SceneOutcome,
};
