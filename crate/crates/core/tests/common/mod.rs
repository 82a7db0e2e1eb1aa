#![allow(dead_code)]

use maqp_core::data::synth_dataset;
use maqp_core::net::gradcheck::relative_error;
use maqp_core::net::MapLoss;
use maqp_core::{Image, QualityNet, SceneRecord};
use rand::Rng;

/// Uniform random 4-channel frame in `[0, 1]`.
pub fn random_frame<R: Rng>(rng: &mut R, h: usize, w: usize) -> Image {
    let data = (0..4 * h * w).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::from_vec(4, h, w, data).unwrap()
}

pub fn desk_scenes(first_seed: u64, count: usize) -> Vec<SceneRecord> {
    synth_dataset(first_seed, count, 64, 64, 3).unwrap()
}

/// True when moving `x` by `±h` along `(c, y, xx)` leaves the ReLU pattern
/// and the loss's active set unchanged.
pub fn smooth_at(net: &QualityNet, x: &Image, loss: &dyn MapLoss, coord: (usize, usize, usize), h: f64) -> bool {
    let base = net.activation_pattern(x).unwrap();
    let active = loss.active_set(&net.forward(x).unwrap());
    [h, -h].iter().all(|d| {
        let mut p = x.clone();
        let (c, y, xx) = coord;
        p.set(c, y, xx, x.get(c, y, xx) + d);
        net.activation_pattern(&p).unwrap() == base && loss.active_set(&net.forward(&p).unwrap()) == active
    })
}

pub fn max_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

/// Relative agreement with an absolute floor for values at finite-difference noise level.
pub fn agree(analytic: f64, numeric: f64, tol: f64) -> bool {
    (analytic - numeric).abs() <= tol * analytic.abs().max(numeric.abs()) + 1e-10
}
