use crate::error::{Error, Result};

/// Regularizer applied to the patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TvMode {
    /// Mean magnitude of forward differences to the right and down neighbors.
    #[default]
    Adjacent,
    /// Mean per-pixel L2 norm of the values themselves.
    LiteralEq5,
}

impl TvMode {
    pub fn name(self) -> &'static str {
        match self {
            TvMode::Adjacent => "adjacent",
            TvMode::LiteralEq5 => "literal-eq5",
        }
    }
}

impl std::str::FromStr for TvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(TvMode::Adjacent),
            "literal-eq5" => Ok(TvMode::LiteralEq5),
            other => Err(Error::InvalidArgument(format!("unknown tv mode `{other}`"))),
        }
    }
}

/// Distribution used for the depth patch at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DepthInit {
    /// Clamped `N(mu_p, sigma_p)` (heterogeneous initialization).
    #[default]
    Gaussian,
    /// `U(0, 1)`, the same as RGB (fixed initialization).
    Uniform,
}

impl DepthInit {
    pub fn name(self) -> &'static str {
        match self {
            DepthInit::Gaussian => "gaussian",
            DepthInit::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for DepthInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DepthInit::Gaussian),
            "uniform" => Ok(DepthInit::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown depth init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdposConfig {
    pub sigma_p: f64,
    pub mu_p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Epoch indices (0-based) from which the rate is divided by ten again.
    pub lr_decay_epochs: Vec<usize>,
    pub batch: usize,
    /// Placed side length as a fraction of `min(H, W)`.
    pub scale_range: (f64, f64),
    pub canvas: (usize, usize),
    pub tv_mode: TvMode,
    pub depth_init: DepthInit,
    pub seed: u64,
}

impl Default for HdposConfig {
    fn default() -> Self {
        Self {
            sigma_p: 0.1,
            mu_p: 0.0,
            alpha: 0.1,
            beta: 0.1,
            gamma: 0.5,
            epochs: 50,
            lr: 0.03,
            lr_decay_epochs: vec![30, 40],
            batch: 8,
            scale_range: (0.2, 0.5),
            canvas: (224, 224),
            tv_mode: TvMode::Adjacent,
            depth_init: DepthInit::Gaussian,
            seed: 0,
        }
    }
}

impl HdposConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.sigma_p.is_nan() || self.sigma_p <= 0.0 {
            return bad(format!("sigma_p = {} must be > 0", self.sigma_p));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("scale range ({lo}, {hi}) must satisfy 0 < low ≤ high ≤ 1"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma >= 0.0) {
            return bad("alpha, beta, gamma must be ≥ 0".into());
        }
        if self.lr.is_nan() || self.lr < 0.0 || self.batch == 0 {
            return bad("lr must be ≥ 0 and batch ≥ 1".into());
        }
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return bad("canvas must be non-empty".into());
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.lr * 0.1f64.powi(decays as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_schedule() {
        let c = HdposConfig::default();
        assert_eq!((c.alpha, c.beta, c.gamma), (0.1, 0.1, 0.5));
        assert_eq!(c.lr, 0.03);
        assert_eq!(c.lr_at(29), 0.03);
        assert!((c.lr_at(30) - 0.003).abs() < 1e-15);
        assert!((c.lr_at(45) - 0.0003).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut c = HdposConfig {
            sigma_p: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.sigma_p = 0.1;
        c.scale_range = (0.6, 0.5);
        assert!(c.validate().is_err());
        c.scale_range = (0.2, 0.5);
        c.gamma = -1.0;
        assert!(c.validate().is_err());
    }
}
