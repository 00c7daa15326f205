use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected feature extractor with rectified hidden layers and a
/// linear output layer.
///
/// Inputs are standardized by a fixed `(shift, scale)` before the first
/// layer; those two values are not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    /// Layer `l` is a `widths[l+1] x widths[l]` row-major matrix.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_shift: f64,
    input_scale: f64,
}

pub(crate) struct ForwardCache {
    /// `acts[l]` is the `n x widths[l]` input to layer `l`; the last entry is the output.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer, `n x widths[l+1]`.
    pre: Vec<Vec<f64>>,
    n: usize,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }
}

impl Mlp {
    /// Weights are drawn from `N(0, 2 / fan_in)`. First-layer biases are
    /// drawn from `N(0, 1 / fan_in)` so the rectifier kinks spread over the
    /// standardized input range; deeper biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        widths: &[usize],
        input_shift: f64,
        input_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "bad layer widths {widths:?}"
            )));
        }
        if !(input_scale > 0.0 && input_scale.is_finite() && input_shift.is_finite()) {
            return Err(Error::InvalidParameter(
                "input scale must be positive and finite".into(),
            ));
        }
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for (l, w) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let wdist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
            weights.push((0..fan_in * fan_out).map(|_| wdist.sample(rng)).collect());
            if l == 0 {
                let bdist = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive sd");
                biases.push((0..fan_out).map(|_| bdist.sample(rng)).collect());
            } else {
                biases.push(vec![0.0; fan_out]);
            }
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
            input_shift,
            input_scale,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Features of a single scalar input.
    pub fn forward(&self, x: f64) -> Vec<f64> {
        self.forward_batch(&[x]).acts.pop().expect("output layer")
    }

    pub(crate) fn forward_batch(&self, xs: &[f64]) -> ForwardCache {
        debug_assert_eq!(self.input_dim(), 1);
        let n = xs.len();
        let mut acts = Vec::with_capacity(self.widths.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        acts.push(
            xs.iter()
                .map(|x| (x - self.input_shift) / self.input_scale)
                .collect::<Vec<_>>(),
        );
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (din, dout) = (self.widths[l], self.widths[l + 1]);
            let input = &acts[l];
            let mut z = vec![0.0; n * dout];
            for r in 0..n {
                let h = &input[r * din..(r + 1) * din];
                for o in 0..dout {
                    let row = &w[o * din..(o + 1) * din];
                    z[r * dout + o] = b[o] + row.iter().zip(h).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            let out = if l == last {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(out);
        }
        ForwardCache { acts, pre, n }
    }

    /// Gradient of a loss with respect to the flattened parameters, given
    /// the loss gradient with respect to the batch outputs (`n x out`).
    pub(crate) fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Vec<f64> {
        let n = cache.n;
        let layers = self.weights.len();
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (din, dout) = (self.widths[l], self.widths[l + 1]);
            if l != layers - 1 {
                for (d, z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.acts[l];
            for r in 0..n {
                let h = &input[r * din..(r + 1) * din];
                for o in 0..dout {
                    let d = delta[r * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[l][o] += d;
                    for (g, x) in gw[l][o * din..(o + 1) * din].iter_mut().zip(h) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut prev = vec![0.0; n * din];
                for r in 0..n {
                    for o in 0..dout {
                        let d = delta[r * dout + o];
                        if d == 0.0 {
                            continue;
                        }
                        for (p, wv) in prev[r * din..(r + 1) * din]
                            .iter_mut()
                            .zip(&w[o * din..(o + 1) * din])
                        {
                            *p += d * wv;
                        }
                    }
                }
                delta = prev;
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in gw.into_iter().zip(gb) {
            flat.extend(w);
            flat.extend(b);
        }
        flat
    }

    pub(crate) fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        flat
    }

    pub(crate) fn set_params_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (wl, bl) = (w.len(), b.len());
            w.copy_from_slice(&flat[at..at + wl]);
            at += wl;
            b.copy_from_slice(&flat[at..at + bl]);
            at += bl;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn shapes_and_roundtrip() {
        let mut mlp = Mlp::init(&[1, 32, 32, 8], 0.0, 1.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(mlp.n_params(), 32 + 32 + 32 * 32 + 32 + 32 * 8 + 8);
        assert_eq!(mlp.forward(0.3).len(), 8);
        let flat = mlp.params_flat();
        let before = mlp.forward(1.7);
        mlp.set_params_flat(&flat);
        assert_eq!(mlp.forward(1.7), before);
        assert!(Mlp::init(&[1], 0.0, 1.0, &mut rng_from_seed(1)).is_err());
        assert!(Mlp::init(&[1, 4], 0.0, 0.0, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences_of_output_sum() {
        let mut mlp = Mlp::init(&[1, 5, 4, 3], 0.2, 1.5, &mut rng_from_seed(3)).unwrap();
        let xs = [-1.3, 0.4, 2.2];
        let weights_out: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let loss = |m: &Mlp| -> f64 {
            m.forward_batch(&xs)
                .output()
                .iter()
                .zip(&weights_out)
                .map(|(a, b)| a * b)
                .sum()
        };
        let cache = mlp.forward_batch(&xs);
        let grad = mlp.backward(&cache, &weights_out);
        let base = mlp.params_flat();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            mlp.set_params_flat(&plus);
            let lp = loss(&mlp);
            let mut minus = base.clone();
            minus[i] -= h;
            mlp.set_params_flat(&minus);
            let lm = loss(&mlp);
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
    }
}
