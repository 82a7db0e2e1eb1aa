//! Seeded inputs shared by the benchmarks in `benches/`.

use maqp_core::data::synth_scene;
use maqp_core::hdpos::{init_patches, HdposConfig, Placement};
use maqp_core::{DepthEncoding, Image, PatchPair, QualityNet, SceneRecord};

/// A synthetic scene of the given size with a hand mask.
pub fn scene(side: usize) -> SceneRecord {
    synth_scene(11, side, side, 3).expect("valid synthetic scene")
}

/// Freshly initialized network; timing does not depend on the weights.
pub fn net() -> QualityNet {
    QualityNet::init(0, DepthEncoding::MinMax)
}

pub fn patches(canvas: usize) -> PatchPair {
    let cfg = HdposConfig {
        canvas: (canvas, canvas),
        ..Default::default()
    };
    init_patches(&cfg, canvas, canvas).expect("valid config")
}

/// A placement covering roughly a third of the frame side.
pub fn placement(side: usize, canvas: usize) -> Placement {
    Placement::new(0.35, (side / 4, side / 3), (side, side), (canvas, canvas)).expect("placement fits")
}

pub fn input(scene: &SceneRecord) -> Image {
    scene.frame.to_input()
}
