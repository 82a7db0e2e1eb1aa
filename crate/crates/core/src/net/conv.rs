//! Same-size 2-D convolution kernels on channel-first buffers.
//!
//! Weights are laid out `[out][in][ky][kx]`. A `k × k` kernel with dilation
//! `d` is zero-padded by `d·(k-1)/2` so the output keeps the input size.

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub dilation: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvShape {
    #[cfg(test)]
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    /// Tap offsets `(dy, dx)` in kernel order.
    fn taps(&self) -> impl Iterator<Item = (usize, isize, isize)> + '_ {
        let r = (self.k / 2) as isize;
        let d = self.dilation as isize;
        (0..self.k * self.k).map(move |t| {
            let ky = (t / self.k) as isize;
            let kx = (t % self.k) as isize;
            (t, (ky - r) * d, (kx - r) * d)
        })
    }

    /// Output rows/cols whose source `y + dy` (resp. `x + dx`) is in range.
    fn span(n: usize, off: isize) -> (usize, usize) {
        let lo = (-off).max(0) as usize;
        let hi = (n as isize - off.max(0)).max(0) as usize;
        (lo.min(hi), hi)
    }
}

pub(crate) fn forward(s: &ConvShape, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let (h, w) = (s.height, s.width);
    let n = h * w;
    debug_assert_eq!(input.len(), s.cin * n);
    debug_assert_eq!(out.len(), s.cout * n);
    for o in 0..s.cout {
        let oplane = &mut out[o * n..(o + 1) * n];
        oplane.fill(bias[o]);
        for c in 0..s.cin {
            let iplane = &input[c * n..(c + 1) * n];
            let wbase = (o * s.cin + c) * s.k * s.k;
            for (t, dy, dx) in s.taps() {
                let wt = weight[wbase + t];
                let (y0, y1) = ConvShape::span(h, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                if y0 >= y1 || x0 >= x1 {
                    continue;
                }
                for y in y0..y1 {
                    let sy = (y as isize + dy) as usize;
                    let src = &iplane[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
                    let dst = &mut oplane[y * w + x0..y * w + x1];
                    for (d, v) in dst.iter_mut().zip(src) {
                        *d += wt * v;
                    }
                }
            }
        }
    }
}

/// Accumulates the input gradient into `grad_in`.
pub(crate) fn backward_input(s: &ConvShape, grad_out: &[f64], weight: &[f64], grad_in: &mut [f64]) {
    let (h, w) = (s.height, s.width);
    let n = h * w;
    for c in 0..s.cin {
        let gplane = &mut grad_in[c * n..(c + 1) * n];
        for o in 0..s.cout {
            let oplane = &grad_out[o * n..(o + 1) * n];
            let wbase = (o * s.cin + c) * s.k * s.k;
            for (t, dy, dx) in s.taps() {
                let wt = weight[wbase + t];
                let (y0, y1) = ConvShape::span(h, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                if y0 >= y1 || x0 >= x1 {
                    continue;
                }
                for y in y0..y1 {
                    let sy = (y as isize + dy) as usize;
                    let base = sy * w;
                    let dst = &mut gplane[base + (x0 as isize + dx) as usize..base + (x1 as isize + dx) as usize];
                    let src = &oplane[y * w + x0..y * w + x1];
                    for (d, g) in dst.iter_mut().zip(src) {
                        *d += wt * g;
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients.
pub(crate) fn backward_params(s: &ConvShape, input: &[f64], grad_out: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) {
    let (h, w) = (s.height, s.width);
    let n = h * w;
    for o in 0..s.cout {
        let oplane = &grad_out[o * n..(o + 1) * n];
        grad_b[o] += oplane.iter().sum::<f64>();
        for c in 0..s.cin {
            let iplane = &input[c * n..(c + 1) * n];
            let wbase = (o * s.cin + c) * s.k * s.k;
            for (t, dy, dx) in s.taps() {
                let (y0, y1) = ConvShape::span(h, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                if y0 >= y1 || x0 >= x1 {
                    continue;
                }
                let mut acc = 0.0;
                for y in y0..y1 {
                    let sy = (y as isize + dy) as usize;
                    let src = &iplane[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
                    let g = &oplane[y * w + x0..y * w + x1];
                    acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                }
                grad_w[wbase + t] += acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct definition with explicit bounds checks.
    fn naive(s: &ConvShape, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let (h, w) = (s.height as isize, s.width as isize);
        let r = (s.k / 2) as isize;
        let d = s.dilation as isize;
        let mut out = vec![0.0; s.cout * (h * w) as usize];
        for o in 0..s.cout {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o];
                    for c in 0..s.cin {
                        for ky in 0..s.k as isize {
                            for kx in 0..s.k as isize {
                                let sy = y + (ky - r) * d;
                                let sx = x + (kx - r) * d;
                                if sy < 0 || sx < 0 || sy >= h || sx >= w {
                                    continue;
                                }
                                let wi = ((o * s.cin + c) * s.k + ky as usize) * s.k + kx as usize;
                                acc += weight[wi] * input[(c as isize * h * w + sy * w + sx) as usize];
                            }
                        }
                    }
                    out[(o as isize * h * w + y * w + x) as usize] = acc;
                }
            }
        }
        out
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn matches_naive_convolution() {
        for &(k, dil) in &[(3usize, 1usize), (3, 2), (1, 1)] {
            let s = ConvShape {
                cin: 3,
                cout: 2,
                k,
                dilation: dil,
                height: 7,
                width: 9,
            };
            let mut seed = 7;
            let input: Vec<f64> = (0..3 * 63).map(|_| lcg(&mut seed)).collect();
            let weight: Vec<f64> = (0..s.weight_len()).map(|_| lcg(&mut seed)).collect();
            let bias = vec![0.25, -0.5];
            let mut out = vec![0.0; 2 * 63];
            forward(&s, &input, &weight, &bias, &mut out);
            for (a, b) in out.iter().zip(naive(&s, &input, &weight, &bias)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), g> = <x, conv^T(g)> + <bias, sum g>
        let s = ConvShape {
            cin: 2,
            cout: 3,
            k: 3,
            dilation: 2,
            height: 6,
            width: 5,
        };
        let mut seed = 3;
        let x: Vec<f64> = (0..60).map(|_| lcg(&mut seed)).collect();
        let wt: Vec<f64> = (0..s.weight_len()).map(|_| lcg(&mut seed)).collect();
        let g: Vec<f64> = (0..90).map(|_| lcg(&mut seed)).collect();
        let mut y = vec![0.0; 90];
        forward(&s, &x, &wt, &[0.0; 3], &mut y);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut gx = vec![0.0; 60];
        backward_input(&s, &g, &wt, &mut gx);
        let rhs: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        let mut gw = vec![0.0; s.weight_len()];
        let mut gb = vec![0.0; 3];
        backward_params(&s, &x, &g, &mut gw, &mut gb);
        let rhs_w: f64 = wt.iter().zip(&gw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs_w).abs() < 1e-10);
    }
}
