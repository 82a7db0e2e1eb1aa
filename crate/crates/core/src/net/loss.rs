//! Scalar functionals of a quality map and their derivatives.

use super::model::{InputGradient, QualityMap, QualityNet};
use crate::error::{Error, Result};
use crate::image::Image;

/// A scalar loss evaluated on a network's quality map.
pub trait MapLoss: Sync {
    fn value(&self, q: &QualityMap) -> Result<f64> {
        self.value_and_grad(q).map(|(v, _)| v)
    }

    /// The loss and `∂L/∂q` per pixel.
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)>;

    /// Pixels selected by non-smooth operators (min/max). A change in this set
    /// between two inputs means a kink lies between them.
    fn active_set(&self, _q: &QualityMap) -> Vec<usize> {
        Vec::new()
    }
}

/// `k · L`.
pub struct Scaled<'a> {
    pub factor: f64,
    pub inner: &'a dyn MapLoss,
}

impl MapLoss for Scaled<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.inner.value_and_grad(q)?;
        g.iter_mut().for_each(|x| *x *= self.factor);
        Ok((self.factor * v, g))
    }

    fn active_set(&self, q: &QualityMap) -> Vec<usize> {
        self.inner.active_set(q)
    }
}

/// Mean squared error against a target map.
pub struct MseLoss<'a> {
    pub target: &'a [f64],
}

impl MapLoss for MseLoss<'_> {
    fn value_and_grad(&self, q: &QualityMap) -> Result<(f64, Vec<f64>)> {
        if self.target.len() != q.values.len() {
            return Err(Error::Shape("target size differs from quality map".into()));
        }
        let n = q.values.len() as f64;
        let mut loss = 0.0;
        let grad = q
            .values
            .iter()
            .zip(self.target)
            .map(|(p, t)| {
                let d = p - t;
                loss += d * d;
                2.0 * d / n
            })
            .collect();
        Ok((loss / n, grad))
    }
}

/// Loss value and its exact derivative with respect to the 4-channel input.
pub fn backward_to_input(net: &QualityNet, frame4: &Image, loss: &dyn MapLoss) -> Result<(f64, InputGradient)> {
    let (v, g) = loss_input_grad(net, frame4, loss)?;
    Ok((v, InputGradient::from_stacked(&g)))
}

pub(crate) fn loss_input_grad(net: &QualityNet, frame4: &Image, loss: &dyn MapLoss) -> Result<(f64, Image)> {
    let (q, cache) = net.forward_cached(frame4)?;
    let (v, dq) = loss.value_and_grad(&q)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("loss value".into()));
    }
    let (_, gx) = net.backward(&cache, &dq, false)?;
    Ok((v, gx))
}

/// MSE against `target` and its gradient with respect to every parameter.
pub fn backward_to_params(net: &QualityNet, frame4: &Image, target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (q, cache) = net.forward_cached(frame4)?;
    let (v, dq) = MseLoss { target }.value_and_grad(&q)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("loss value".into()));
    }
    let (gp, _) = net.backward(&cache, &dq, true)?;
    Ok((v, gp.expect("requested")))
}
