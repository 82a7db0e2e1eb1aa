//! Modality-aware adversarial quality patches for RGB-D grasp detectors.
//!
//! The crate holds a small fully-convolutional grasp-quality network with a
//! hand-written backward pass, the joint RGB/depth patch optimizer, per-frame
//! gradient-balanced shape adaptation inside a hand mask, and evaluation.

pub mod data;
pub mod error;
pub mod eval;
pub mod glmbs;
pub mod hdpos;
pub mod image;
pub mod mask;
pub mod net;
pub mod optim;

pub use data::{PatchPair, RgbdFrame, SceneRecord};
pub use error::{Error, Result};
pub use image::Image;
pub use mask::{BBox, Mask};
pub use net::{DepthEncoding, QualityMap, QualityNet};
