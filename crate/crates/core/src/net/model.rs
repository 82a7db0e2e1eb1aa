//! The desk-scale fully convolutional grasp-quality network.
//!
//! | layer | op                         | channels | params |
//! |-------|----------------------------|----------|--------|
//! | 1     | 3×3 conv, pad 1, ReLU      | 4 → 16   | 592    |
//! | 2     | 3×3 conv, dil 2, pad 2, ReLU | 16 → 16 | 2320   |
//! | 3     | 1×1 conv, logistic         | 16 → 1   | 17     |
//!
//! 2929 parameters in total, stored flat in declaration order
//! `w1, b1, w2, b2, w3, b3`. The receptive field is 7×7.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{self, ConvShape};
use crate::error::{Error, Result};
use crate::image::Image;

pub const INPUT_CHANNELS: usize = 4;
pub const HIDDEN: usize = 16;
/// Pixels from the border within which outputs see zero padding.
pub const BOUNDARY_BAND: usize = 3;

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * INPUT_CHANNELS * 9;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN * 9;
const W3: usize = B2 + HIDDEN;
const B3: usize = W3 + HIDDEN;
pub const PARAM_COUNT: usize = B3 + 1;

/// How the depth channel is presented to the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DepthEncoding {
    /// Depth enters as stored, in `[0, 1]`.
    #[default]
    MinMax,
    /// Depth is shifted by −0.5 before the first layer.
    ZeroCentered,
}

impl DepthEncoding {
    pub fn offset(self) -> f64 {
        match self {
            DepthEncoding::MinMax => 0.0,
            DepthEncoding::ZeroCentered => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DepthEncoding::MinMax => "minmax",
            DepthEncoding::ZeroCentered => "zero-centered",
        }
    }
}

impl std::str::FromStr for DepthEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(DepthEncoding::MinMax),
            "zero-centered" => Ok(DepthEncoding::ZeroCentered),
            other => Err(Error::InvalidArgument(format!("unknown depth encoding `{other}`"))),
        }
    }
}

/// Per-pixel grasp quality in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl QualityMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!("{} values for {height}x{width}", values.len())));
        }
        Ok(Self { height, width, values })
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Row-major index of the first maximal value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Gradient of a scalar with respect to the 4-channel input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub rgb: Image,
    pub depth: Image,
}

impl InputGradient {
    pub fn from_stacked(g: &Image) -> Self {
        Self {
            rgb: g.channels_range(0, 3),
            depth: g.channels_range(3, 4),
        }
    }

    pub fn stacked(&self) -> Image {
        Image::concat(&[&self.rgb, &self.depth]).expect("same size")
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    height: usize,
    width: usize,
    input: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityNet {
    params: Vec<f64>,
    encoding: DepthEncoding,
}

impl QualityNet {
    /// Fan-in scaled uniform weights, zero biases.
    ///
    /// ReLU layers draw from `U(±√(6/fan_in))`, the output layer from
    /// `U(±√(3/fan_in))`.
    pub fn init(seed: u64, encoding: DepthEncoding) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; PARAM_COUNT];
        let mut fill = |range: std::ops::Range<usize>, bound: f64| {
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(W1..B1, (6.0 / (INPUT_CHANNELS * 9) as f64).sqrt());
        fill(W2..B2, (6.0 / (HIDDEN * 9) as f64).sqrt());
        fill(W3..B3, (3.0 / HIDDEN as f64).sqrt());
        Self { params, encoding }
    }

    pub fn from_params(params: Vec<f64>, encoding: DepthEncoding) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::Shape(format!(
                "{} parameters, expected {PARAM_COUNT}",
                params.len()
            )));
        }
        Ok(Self { params, encoding })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn encoding(&self) -> DepthEncoding {
        self.encoding
    }

    /// Human-readable architecture descriptor, hashed into checkpoints.
    pub fn descriptor(&self) -> String {
        format!(
            "maqp-fcn/v1;conv3x3(4,{HIDDEN},dil1)+relu;conv3x3({HIDDEN},{HIDDEN},dil2)+relu;\
             conv1x1({HIDDEN},1)+sigmoid;params={PARAM_COUNT};depth={}",
            self.encoding.name()
        )
    }

    fn shapes(h: usize, w: usize) -> [ConvShape; 3] {
        [
            ConvShape {
                cin: INPUT_CHANNELS,
                cout: HIDDEN,
                k: 3,
                dilation: 1,
                height: h,
                width: w,
            },
            ConvShape {
                cin: HIDDEN,
                cout: HIDDEN,
                k: 3,
                dilation: 2,
                height: h,
                width: w,
            },
            ConvShape {
                cin: HIDDEN,
                cout: 1,
                k: 1,
                dilation: 1,
                height: h,
                width: w,
            },
        ]
    }

    pub fn forward(&self, x: &Image) -> Result<QualityMap> {
        self.forward_cached(x).map(|(q, _)| q)
    }

    pub fn forward_cached(&self, x: &Image) -> Result<(QualityMap, ForwardCache)> {
        if x.channels() != INPUT_CHANNELS {
            return Err(Error::Shape(format!("{} input channels, expected 4", x.channels())));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        let (h, w) = x.hw();
        let n = h * w;
        let [s1, s2, s3] = Self::shapes(h, w);
        let p = &self.params;

        let mut input = x.data().to_vec();
        let off = self.encoding.offset();
        if off != 0.0 {
            for v in &mut input[3 * n..] {
                *v -= off;
            }
        }
        let mut a1 = vec![0.0; HIDDEN * n];
        conv::forward(&s1, &input, &p[W1..B1], &p[B1..W2], &mut a1);
        relu(&mut a1);
        let mut a2 = vec![0.0; HIDDEN * n];
        conv::forward(&s2, &a1, &p[W2..B2], &p[B2..W3], &mut a2);
        relu(&mut a2);
        let mut q = vec![0.0; n];
        conv::forward(&s3, &a2, &p[W3..B3], &p[B3..], &mut q);
        for v in &mut q {
            *v = sigmoid(*v);
        }
        let map = QualityMap::new(h, w, q.clone())?;
        Ok((
            map,
            ForwardCache {
                height: h,
                width: w,
                input,
                a1,
                a2,
                q,
            },
        ))
    }

    /// Reverse pass from `dq = ∂L/∂q`. Returns the parameter gradient when
    /// `want_params` is set, and always the input gradient.
    pub fn backward(&self, cache: &ForwardCache, dq: &[f64], want_params: bool) -> Result<(Option<Vec<f64>>, Image)> {
        let (h, w) = (cache.height, cache.width);
        let n = h * w;
        if dq.len() != n {
            return Err(Error::Shape(format!("{} output gradients for {h}x{w}", dq.len())));
        }
        if dq.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        let [s1, s2, s3] = Self::shapes(h, w);
        let p = &self.params;
        let mut gp = want_params.then(|| vec![0.0; PARAM_COUNT]);

        let dz3: Vec<f64> = dq.iter().zip(&cache.q).map(|(g, q)| g * q * (1.0 - q)).collect();

        let mut dz2 = vec![0.0; HIDDEN * n];
        conv::backward_input(&s3, &dz3, &p[W3..B3], &mut dz2);
        relu_mask(&mut dz2, &cache.a2);

        let mut dz1 = vec![0.0; HIDDEN * n];
        conv::backward_input(&s2, &dz2, &p[W2..B2], &mut dz1);
        relu_mask(&mut dz1, &cache.a1);

        let mut dx = vec![0.0; INPUT_CHANNELS * n];
        conv::backward_input(&s1, &dz1, &p[W1..B1], &mut dx);

        if let Some(g) = gp.as_mut() {
            let (gw3, rest) = g[W3..].split_at_mut(B3 - W3);
            conv::backward_params(&s3, &cache.a2, &dz3, gw3, rest);
            let (gw2, rest) = g[W2..W3].split_at_mut(B2 - W2);
            conv::backward_params(&s2, &cache.a1, &dz2, gw2, rest);
            let (gw1, rest) = g[W1..W2].split_at_mut(B1 - W1);
            conv::backward_params(&s1, &cache.input, &dz1, gw1, rest);
        }
        Ok((gp, Image::from_vec(INPUT_CHANNELS, h, w, dx)?))
    }

    /// ReLU on/off pattern of both hidden layers; equal patterns at two inputs
    /// mean the network is a single smooth branch between them.
    pub fn activation_pattern(&self, x: &Image) -> Result<Vec<bool>> {
        let (_, cache) = self.forward_cached(x)?;
        Ok(cache.a1.iter().chain(&cache.a2).map(|&a| a > 0.0).collect())
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_mask(grad: &mut [f64], act: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_input(seed: u64, h: usize, w: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..4 * h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        Image::from_vec(4, h, w, data).unwrap()
    }

    #[test]
    fn parameter_count_is_fixed() {
        assert_eq!(PARAM_COUNT, 592 + 2320 + 17);
        assert_eq!(QualityNet::init(0, DepthEncoding::MinMax).params().len(), 2929);
    }

    #[test]
    fn zero_input_gives_one_half() {
        let net = QualityNet::init(1, DepthEncoding::MinMax);
        let q = net.forward(&Image::zeros(4, 9, 11)).unwrap();
        assert_eq!(q.hw(), (9, 11));
        assert!(q.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn non_finite_input_fails() {
        let net = QualityNet::init(1, DepthEncoding::MinMax);
        let mut x = Image::zeros(4, 4, 4);
        x.set(2, 1, 1, f64::NAN);
        assert!(matches!(net.forward(&x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn argmax_prefers_first_maximum() {
        let q = QualityMap::new(2, 2, vec![0.1, 0.7, 0.7, 0.2]).unwrap();
        assert_eq!(q.argmax(), 1);
    }

    #[test]
    fn translation_equivariant_in_interior() {
        let net = QualityNet::init(4, DepthEncoding::MinMax);
        let (h, w) = (16, 16);
        let x = random_input(9, h, w);
        let mut shifted = Image::zeros(4, h, w);
        for c in 0..4 {
            for y in 1..h {
                for xx in 1..w {
                    shifted.set(c, y, xx, x.get(c, y - 1, xx - 1));
                }
            }
        }
        let q = net.forward(&x).unwrap();
        let qs = net.forward(&shifted).unwrap();
        let b = BOUNDARY_BAND;
        for y in b + 1..h - b {
            for xx in b + 1..w - b {
                let a = q.values[(y - 1) * w + xx - 1];
                let s = qs.values[y * w + xx];
                assert!((a - s).abs() < 1e-12, "({y},{xx})");
            }
        }
    }

    proptest! {
        #[test]
        fn outputs_are_in_open_unit_interval(seed in any::<u64>(), h in 1usize..10, w in 1usize..10) {
            let net = QualityNet::init(seed, DepthEncoding::MinMax);
            let q = net.forward(&random_input(seed ^ 1, h, w)).unwrap();
            prop_assert_eq!(q.values.len(), h * w);
            prop_assert!(q.values.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
