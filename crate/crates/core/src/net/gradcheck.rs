//! Central finite differences as an independent check on backpropagation.

use rand::Rng;

use super::loss::{loss_input_grad, MapLoss, MseLoss};
use super::model::QualityNet;
use crate::error::{Error, Result};
use crate::image::Image;

/// Input coordinate `(channel, row, col)`.
pub type Coord = (usize, usize, usize);

/// `(f(x + h·e) − f(x − h·e)) / 2h` at each coordinate.
pub fn finite_diff(f: &mut dyn FnMut(&Image) -> Result<f64>, x: &Image, coords: &[Coord], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let mut probe = x.clone();
    coords
        .iter()
        .map(|&(c, y, xx)| {
            let orig = x.get(c, y, xx);
            probe.set(c, y, xx, orig + h);
            let plus = f(&probe)?;
            probe.set(c, y, xx, orig - h);
            let minus = f(&probe)?;
            probe.set(c, y, xx, orig);
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// Finite-difference estimate of `∂L(f_θ(x))/∂x` at `coords`.
pub fn finite_diff_oracle(
    net: &QualityNet,
    frame4: &Image,
    loss: &dyn MapLoss,
    coords: &[Coord],
    h: f64,
) -> Result<Vec<f64>> {
    finite_diff(&mut |x| loss.value(&net.forward(x)?), frame4, coords, h)
}

/// Finite-difference estimate of the MSE gradient at parameter `indices`.
pub fn finite_diff_params(
    net: &QualityNet,
    frame4: &Image,
    target: &[f64],
    indices: &[usize],
    h: f64,
) -> Result<Vec<f64>> {
    let loss = MseLoss { target };
    let mut probe = net.clone();
    indices
        .iter()
        .map(|&i| {
            let orig = net.params()[i];
            probe.params_mut()[i] = orig + h;
            let plus = loss.value(&probe.forward(frame4)?)?;
            probe.params_mut()[i] = orig - h;
            let minus = loss.value(&probe.forward(frame4)?)?;
            probe.params_mut()[i] = orig;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Tolerance rule: doubled where the analytic value is below `1e-8`.
pub fn tolerance_at(analytic: f64, tol: f64) -> f64 {
    if analytic.abs() < 1e-8 {
        2.0 * tol
    } else {
        tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub coord: Coord,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
    pub tol: f64,
}

impl GradCheckEntry {
    pub fn passed(&self) -> bool {
        self.rel_err <= self.tol
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    /// Candidates rejected because a ReLU or min/max switched inside `±h`.
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(GradCheckEntry::passed)
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.passed()).count()
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_err).fold(0.0, f64::max)
    }
}

/// Compares analytic input gradients with central differences at `n`
/// coordinates drawn from `candidates`.
///
/// A candidate is rejected (and another drawn) when the ReLU pattern or the
/// loss's active set at `x ± h·e` differs from that at `x`, since the loss
/// is then not smooth on the differencing interval.
#[allow(clippy::too_many_arguments)]
pub fn check_input_gradient<R: Rng>(
    net: &QualityNet,
    frame4: &Image,
    loss: &dyn MapLoss,
    candidates: &[Coord],
    n: usize,
    h: f64,
    tol: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate coordinates".into()));
    }
    let (_, grad) = loss_input_grad(net, frame4, loss)?;
    let base_pattern = net.activation_pattern(frame4)?;
    let base_active = loss.active_set(&net.forward(frame4)?);
    let mut report = GradCheckReport::default();
    let mut attempts = 0;
    while report.entries.len() < n && attempts < 50 * n {
        attempts += 1;
        let coord = candidates[rng.random_range(0..candidates.len())];
        let (c, y, x) = coord;
        let mut smooth = true;
        for sign in [1.0, -1.0] {
            let mut probe = frame4.clone();
            probe.set(c, y, x, frame4.get(c, y, x) + sign * h);
            if net.activation_pattern(&probe)? != base_pattern || loss.active_set(&net.forward(&probe)?) != base_active
            {
                smooth = false;
            }
        }
        if !smooth {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = finite_diff_oracle(net, frame4, loss, &[coord], h)?[0];
        let analytic = grad.get(c, y, x);
        report.entries.push(GradCheckEntry {
            coord,
            analytic,
            numeric,
            rel_err: relative_error(analytic, numeric),
            tol: tolerance_at(analytic, tol),
        });
    }
    Ok(report)
}
