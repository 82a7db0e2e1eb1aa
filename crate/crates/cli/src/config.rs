//! Flat run configuration: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::Path;

use maqp_core::eval::{EvalConfig, PlacementMode};
use maqp_core::glmbs::{GlmbsConfig, UpdateMode};
use maqp_core::hdpos::{DepthInit, HdposConfig, TvMode};
use maqp_core::net::{DepthEncoding, TrainConfig};

use crate::failure::{Failure, Kind};

/// `(key, default, help)` for every configurable value.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "Seed for every stochastic stage"),
    ("split-fraction", "0.9", "Fraction of scenes used for training"),
    ("scenes", "100", "Number of synthetic scenes"),
    ("height", "64", "Synthetic scene height"),
    ("width", "64", "Synthetic scene width"),
    ("objects", "3", "Objects per synthetic scene"),
    ("hand", "true", "Add a hand mask to synthetic scenes"),
    ("epochs", "50", "Model training epochs"),
    ("lr", "0.001", "Model learning rate"),
    ("batch", "8", "Model batch size"),
    (
        "depth-encoding",
        "minmax",
        "Depth input encoding: minmax | zero-centered",
    ),
    ("aqp-epochs", "50", "Patch optimization epochs"),
    ("aqp-lr", "0.03", "Patch learning rate"),
    (
        "aqp-decay",
        "30,40",
        "Epochs at which the patch learning rate drops tenfold",
    ),
    ("aqp-batch", "8", "Patch optimization batch size"),
    ("sigma-p", "0.1", "Std. dev. of the depth patch initialization"),
    ("mu-p", "0", "Mean of the depth patch initialization"),
    ("alpha", "0.1", "Variance weight of the quality loss"),
    ("beta", "0.1", "Weight of the smoothness term"),
    ("gamma", "0.5", "Weight of the difference term"),
    ("scale-min", "0.2", "Smallest placed patch side, fraction of min(H, W)"),
    ("scale-max", "0.5", "Largest placed patch side, fraction of min(H, W)"),
    ("canvas", "224x224", "Patch canvas size HxW"),
    ("tv-mode", "adjacent", "Smoothness term: adjacent | literal-eq5"),
    (
        "depth-init",
        "gaussian",
        "Depth patch initialization: gaussian | uniform",
    ),
    ("pqgd-iters", "1", "Shape adaptation iterations"),
    ("pqgd-lr", "0.008", "Shape adaptation step size"),
    ("epsilon", "8/255", "RGB perturbation bound"),
    ("lambda", "1.0", "Distance scaling of the depth bound"),
    ("w-d", "1.0", "Depth gradient weight"),
    (
        "update-mode",
        "scaled-sign",
        "Adaptation update: scaled-sign | raw-gradient",
    ),
    ("balance", "true", "Reweight RGB gradients by the sensitivity ratio"),
    (
        "placement",
        "random-seeded",
        "Evaluation placement: random-seeded | hand-mask",
    ),
    ("eval-adapt", "false", "Adapt each frame before evaluation"),
    ("gc-coords", "50", "Gradient check coordinates per loss"),
    ("gc-h", "1e-4", "Gradient check step"),
    ("gc-tol", "1e-4", "Gradient check relative tolerance"),
];

fn usage(msg: impl Into<String>) -> Failure {
    Failure::new(Kind::Usage, msg)
}

fn canonical(key: &str) -> String {
    key.trim().replace('_', "-")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let k = canonical(key);
        match self.values.get_mut(&k) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(usage(format!("unknown configuration key `{key}`"))),
        }
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str, origin: &str) -> Result<(), Failure> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| usage(format!("{origin}:{}: {}", n + 1, e.msg)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::new(Kind::Io, format!("cannot read config {}: {e}", path.display())))?;
        self.apply_file_text(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key is in the table")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, Failure> {
        self.get(key)
            .parse()
            .map_err(|_| usage(format!("invalid value `{}` for {key}", self.get(key))))
    }

    fn real(&self, key: &str) -> Result<f64, Failure> {
        let s = self.get(key);
        let v = match s.split_once('/') {
            Some((a, b)) => {
                let (a, b): (f64, f64) = (
                    a.trim()
                        .parse()
                        .map_err(|_| usage(format!("invalid value `{s}` for {key}")))?,
                    b.trim()
                        .parse()
                        .map_err(|_| usage(format!("invalid value `{s}` for {key}")))?,
                );
                a / b
            }
            None => self.parse(key)?,
        };
        if !v.is_finite() {
            return Err(usage(format!("{key} must be finite")));
        }
        Ok(v)
    }

    fn flag(&self, key: &str) -> Result<bool, Failure> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(usage(format!("invalid boolean `{other}` for {key}"))),
        }
    }

    fn enumerated<T: std::str::FromStr>(&self, key: &str) -> Result<T, Failure> {
        self.parse(key)
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.parse("seed")
    }

    pub fn split_fraction(&self) -> Result<f64, Failure> {
        let f = self.real("split-fraction")?;
        if !(0.0..=1.0).contains(&f) {
            return Err(usage(format!("split-fraction {f} must lie in [0, 1]")));
        }
        Ok(f)
    }

    pub fn synth(&self) -> Result<(usize, usize, usize, usize, bool), Failure> {
        Ok((
            self.parse("scenes")?,
            self.parse("height")?,
            self.parse("width")?,
            self.parse("objects")?,
            self.flag("hand")?,
        ))
    }

    pub fn depth_encoding(&self) -> Result<DepthEncoding, Failure> {
        self.enumerated("depth-encoding")
    }

    pub fn train(&self) -> Result<TrainConfig, Failure> {
        let c = TrainConfig {
            epochs: self.parse("epochs")?,
            lr: self.real("lr")?,
            batch: self.parse("batch")?,
            seed: self.seed()?,
        };
        if c.batch == 0 || c.lr.is_nan() || c.lr <= 0.0 {
            return Err(usage("batch must be ≥ 1 and lr > 0"));
        }
        Ok(c)
    }

    pub fn hdpos(&self) -> Result<HdposConfig, Failure> {
        let decay = self.get("aqp-decay");
        let lr_decay_epochs = if decay.is_empty() {
            Vec::new()
        } else {
            decay
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| usage(format!("invalid aqp-decay `{decay}`")))
                })
                .collect::<Result<_, _>>()?
        };
        let canvas = self.get("canvas");
        let (ch, cw) = canvas
            .split_once('x')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| usage(format!("invalid canvas `{canvas}`, expected HxW")))?;
        let c = HdposConfig {
            sigma_p: self.real("sigma-p")?,
            mu_p: self.real("mu-p")?,
            alpha: self.real("alpha")?,
            beta: self.real("beta")?,
            gamma: self.real("gamma")?,
            epochs: self.parse("aqp-epochs")?,
            lr: self.real("aqp-lr")?,
            lr_decay_epochs,
            batch: self.parse("aqp-batch")?,
            scale_range: (self.real("scale-min")?, self.real("scale-max")?),
            canvas: (ch, cw),
            tv_mode: self.enumerated::<TvMode>("tv-mode")?,
            depth_init: self.enumerated::<DepthInit>("depth-init")?,
            seed: self.seed()?,
        };
        c.validate().map_err(|e| usage(e.to_string()))?;
        Ok(c)
    }

    pub fn glmbs(&self) -> Result<GlmbsConfig, Failure> {
        let c = GlmbsConfig {
            iterations: self.parse("pqgd-iters")?,
            lr: self.real("pqgd-lr")?,
            epsilon: self.real("epsilon")?,
            lambda: self.real("lambda")?,
            w_d: self.real("w-d")?,
            update_mode: self.enumerated::<UpdateMode>("update-mode")?,
            balance: self.flag("balance")?,
        };
        c.validate().map_err(|e| usage(e.to_string()))?;
        Ok(c)
    }

    pub fn eval(&self) -> Result<EvalConfig, Failure> {
        let h = self.hdpos()?;
        Ok(EvalConfig {
            placement: self.enumerated::<PlacementMode>("placement")?,
            scale_range: h.scale_range,
            seed: self.seed()?,
            adapt: if self.flag("eval-adapt")? {
                Some(self.glmbs()?)
            } else {
                None
            },
        })
    }

    pub fn gradcheck(&self) -> Result<(usize, f64, f64), Failure> {
        let n: usize = self.parse("gc-coords")?;
        let h = self.real("gc-h")?;
        let tol = self.real("gc-tol")?;
        if n == 0 || h.is_nan() || h <= 0.0 || tol.is_nan() || tol <= 0.0 {
            return Err(usage("gc-coords, gc-h and gc-tol must be positive"));
        }
        Ok((n, h, tol))
    }

    /// Checks every typed view so that bad values fail before any work starts.
    pub fn validate(&self) -> Result<(), Failure> {
        self.split_fraction()?;
        self.synth()?;
        self.depth_encoding()?;
        self.train()?;
        self.hdpos()?;
        self.glmbs()?;
        self.eval()?;
        self.gradcheck()?;
        Ok(())
    }

    /// Snapshot written beside every run's outputs, in table order.
    pub fn snapshot(&self, command: &str) -> String {
        let mut s = format!("# command = {command}\n");
        for (k, _, _) in KEYS {
            s.push_str(&format!("{k} = {}\n", self.get(k)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert!((c.glmbs().unwrap().epsilon - 8.0 / 255.0).abs() < 1e-15);
        assert_eq!(c.hdpos().unwrap(), HdposConfig::default());
        assert_eq!(c.glmbs().unwrap(), GlmbsConfig::default());
        let t = c.train().unwrap();
        assert_eq!((t.epochs, t.lr, t.batch), (50, 0.001, 8));
    }

    #[test]
    fn file_then_flag_precedence() {
        let mut c = RunConfig::default();
        c.apply_file_text("# comment\nalpha = 0.3\nsigma_p = 0.2 # inline\n", "f")
            .unwrap();
        c.set("alpha", "0.4").unwrap();
        let h = c.hdpos().unwrap();
        assert_eq!((h.alpha, h.sigma_p), (0.4, 0.2));
    }

    #[test]
    fn bad_input_is_usage_error() {
        let mut c = RunConfig::default();
        assert_eq!(c.apply_file_text("nonsense = 1", "f").unwrap_err().kind, Kind::Usage);
        assert_eq!(c.apply_file_text("no equals sign", "f").unwrap_err().kind, Kind::Usage);
        c.set("sigma-p", "0").unwrap();
        assert_eq!(c.validate().unwrap_err().kind, Kind::Usage);
        let mut c = RunConfig::default();
        c.set("canvas", "224").unwrap();
        assert!(c.hdpos().is_err());
    }

    #[test]
    fn snapshot_lists_every_key() {
        let s = RunConfig::default().snapshot("eval");
        assert_eq!(s.lines().count(), KEYS.len() + 1);
        let mut back = RunConfig::default();
        back.apply_file_text(&s, "snap").unwrap();
        assert_eq!(back, RunConfig::default());
    }
}
