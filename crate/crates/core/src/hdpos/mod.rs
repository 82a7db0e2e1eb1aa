//! Joint optimization of an RGB patch and a depth patch under a shared mask.

pub mod compose;
pub mod config;
pub mod generate;
pub mod loss;
pub mod placement;

pub use compose::{composite, composite_backward};
pub use config::{DepthInit, HdposConfig, TvMode};
pub use generate::{
    epoch_means, format_trace, generate_patch, generate_patch_with, init_patches, patched_quality, HdposOutcome,
    PlacementPolicy, TraceRow,
};
pub use loss::{
    aqp_loss, difference_loss, mean_in_mask, quality_loss, tv_image, tv_loss, tv_loss_grad, AqpTerms, DifferenceLoss,
    FrameAqpLoss, QualityLoss,
};
pub use placement::{place_patch, Placement};
