//! Domain types, preprocessing, ingestion, and persistence.

pub mod dataset;
pub mod frame;
pub mod grasp;
pub mod patch;
pub mod synth;

pub use dataset::{load_all, load_dataset, split_records, write_manifest_dataset, SceneRecord};
pub use frame::{normalize_depth, NormalizedDepth, RgbdFrame};
pub use grasp::{parse_grasps, read_grasps, rects_to_quality, GraspRect, GroundTruthMaps};
pub use patch::{decode_bundle, encode_bundle, load_patch_bundle, save_patch_bundle, PatchPair};
pub use synth::{synth_dataset, synth_scene, synth_scene_with, SynthOptions};
