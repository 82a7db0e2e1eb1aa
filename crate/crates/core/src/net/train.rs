//! Mini-batch training of the quality network on per-pixel MSE.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::backward_to_params;
use super::model::{QualityNet, PARAM_COUNT};
use crate::data::SceneRecord;
use crate::error::{Error, Result};
use crate::optim::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.001,
            batch: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: QualityNet,
    /// Mean training MSE per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Mean MSE and mean parameter gradient over `scenes`.
///
/// Per-scene gradients may be computed in parallel; they are summed in index
/// order so the result does not depend on the thread count.
pub fn batch_gradient(net: &QualityNet, scenes: &[&SceneRecord]) -> Result<(f64, Vec<f64>)> {
    let parts: Vec<(f64, Vec<f64>)> = scenes
        .par_iter()
        .map(|s| backward_to_params(net, &s.frame.to_input(), &s.gt.quality))
        .collect::<Result<_>>()?;
    let k = scenes.len() as f64;
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g /= k);
    Ok((loss / k, grad))
}

pub fn train_model(net: &QualityNet, train: &[SceneRecord], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if cfg.batch == 0 || cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::InvalidArgument("batch must be ≥ 1 and lr > 0".into()));
    }
    let mut net = net.clone();
    let mut opt = Adam::new(PARAM_COUNT, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&SceneRecord> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grad) = batch_gradient(&net, &batch).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("training diverged at epoch {}: {m}", epoch + 1)),
                e => e,
            })?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("training diverged at epoch {}", epoch + 1)));
            }
            opt.step(net.params_mut(), &grad);
            total += loss * chunk.len() as f64;
        }
        let mean = total / train.len() as f64;
        log::debug!("epoch {} mse {mean:.6}", epoch + 1);
        epoch_loss.push(mean);
    }
    Ok(TrainOutcome { net, epoch_loss })
}

/// Mean per-scene MSE of `net` on `scenes`.
pub fn evaluate_mse(net: &QualityNet, scenes: &[SceneRecord]) -> Result<f64> {
    let losses: Vec<f64> = scenes
        .par_iter()
        .map(|s| {
            let q = net.forward(&s.frame.to_input())?;
            Ok(q.values
                .iter()
                .zip(&s.gt.quality)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / q.values.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / scenes.len().max(1) as f64)
}
