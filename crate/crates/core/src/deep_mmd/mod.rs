//! Two-sample testing with a learned deep kernel.
//!
//! The kernel on scalars is
//!
//! ```text
//! k(x, y) = [(1 - e) exp(-|phi(x) - phi(y)|^2 / (2 s_phi^2)) + e] * exp(-(x - y)^2 / (2 s_q^2))
//! ```
//!
//! where `phi` is a small MLP. Its parameters are trained on one half of the
//! data to maximize `mmd2_u / sqrt(variance_hat)` and the other half is
//! tested by permutation.

mod mlp;
mod perm;
mod train;

pub use mlp::Mlp;
pub use perm::{mmd_d_test, permutation_test, MmdTestConfig, MmdTestOutcome, TestResult};
pub use train::{
    init_kernel, objective, objective_and_gradient, train_kernel, KernelTrainConfig, TrainedKernel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric kernel on scalars.
pub trait ScalarKernel: Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Row-major Gram matrix of `zs`.
    fn gram(&self, zs: &[f64]) -> Vec<f64> {
        let n = zs.len();
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            g[a * n + a] = self.eval(zs[a], zs[a]);
            for b in a + 1..n {
                let v = self.eval(zs[a], zs[b]);
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    }
}

/// Plain Gaussian kernel `exp(-(x - y)^2 / (2 bandwidth^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub bandwidth: f64,
}

impl ScalarKernel for GaussianKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (-(x - y) * (x - y) / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Deep kernel state. Lengthscales and the mixing weight are stored
/// unconstrained (log and logit) so every value is admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub mlp: Mlp,
    pub log_sigma_phi: f64,
    pub log_sigma_q: f64,
    pub logit_eps: f64,
}

impl KernelParams {
    pub fn sigma_phi(&self) -> f64 {
        self.log_sigma_phi.exp()
    }

    pub fn sigma_q(&self) -> f64 {
        self.log_sigma_q.exp()
    }

    /// Mixing weight in `(0, 1)`.
    pub fn eps(&self) -> f64 {
        sigmoid(self.logit_eps)
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params() + 3
    }

    /// MLP parameters followed by `log_sigma_phi`, `log_sigma_q`, `logit_eps`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.mlp.params_flat();
        v.extend([self.log_sigma_phi, self.log_sigma_q, self.logit_eps]);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let k = self.mlp.n_params();
        self.mlp.set_params_flat(&flat[..k]);
        self.log_sigma_phi = flat[k];
        self.log_sigma_q = flat[k + 1];
        self.logit_eps = flat[k + 2];
    }

    /// Gram matrix together with the features, so callers can reuse them.
    pub(crate) fn gram_with_features(&self, zs: &[f64]) -> Vec<f64> {
        let n = zs.len();
        let phi = self.mlp.forward_batch(zs);
        let phi = phi.output();
        let d = self.mlp.output_dim();
        let (sp2, sq2, eps) = (
            2.0 * self.sigma_phi().powi(2),
            2.0 * self.sigma_q().powi(2),
            self.eps(),
        );
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            g[a * n + a] = 1.0;
            let fa = &phi[a * d..(a + 1) * d];
            for b in a + 1..n {
                let fb = &phi[b * d..(b + 1) * d];
                let dphi: f64 = fa.iter().zip(fb).map(|(u, v)| (u - v) * (u - v)).sum();
                let dq = (zs[a] - zs[b]) * (zs[a] - zs[b]);
                let v = ((1.0 - eps) * (-dphi / sp2).exp() + eps) * (-dq / sq2).exp();
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    }
}

impl ScalarKernel for KernelParams {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (self.mlp.forward(x), self.mlp.forward(y));
        let dphi: f64 = fx.iter().zip(&fy).map(|(u, v)| (u - v) * (u - v)).sum();
        let a = (-dphi / (2.0 * self.sigma_phi().powi(2))).exp();
        let q = (-(x - y) * (x - y) / (2.0 * self.sigma_q().powi(2))).exp();
        let eps = self.eps();
        ((1.0 - eps) * a + eps) * q
    }

    fn gram(&self, zs: &[f64]) -> Vec<f64> {
        self.gram_with_features(zs)
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_samples(xs: &[f64], ys: &[f64]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 points per sample, got {}",
            xs.len()
        )));
    }
    Ok(xs.len())
}

fn pooled(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    xs.iter().chain(ys).copied().collect()
}

/// Unbiased MMD^2 from a pooled Gram matrix of size `n x n` and the index
/// sets of the two samples (equal length `m`):
/// `sum_{i != j} H_ij / (m (m - 1))` with
/// `H_ij = k(x_i, x_j) + k(y_i, y_j) - k(x_i, y_j) - k(y_i, x_j)`.
pub(crate) fn mmd2_u_from_gram(gram: &[f64], n: usize, xi: &[usize], yi: &[usize]) -> f64 {
    let m = xi.len();
    // The statistic is a small difference of O(1) kernel sums, so the
    // per-pair terms are accumulated with compensation.
    let mut total = CompensatedSum::default();
    for i in 0..m {
        let rx = &gram[xi[i] * n..(xi[i] + 1) * n];
        let ry = &gram[yi[i] * n..(yi[i] + 1) * n];
        for j in 0..m {
            if i != j {
                total.add((rx[xi[j]] - rx[yi[j]]) + (ry[yi[j]] - ry[xi[j]]));
            }
        }
    }
    total.value() / (m * (m - 1)) as f64
}

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// The `m x m` matrix `H` including its diagonal.
pub(crate) fn h_matrix(gram: &[f64], m: usize) -> Vec<f64> {
    let n = 2 * m;
    let mut h = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            h[i * m + j] = gram[i * n + j] + gram[(m + i) * n + m + j]
                - gram[i * n + m + j]
                - gram[j * n + m + i];
        }
    }
    h
}

/// Unbiased MMD^2 U-statistic of two equal-size samples.
pub fn mmd2_u<K: ScalarKernel + ?Sized>(kernel: &K, xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = check_samples(xs, ys)?;
    let gram = kernel.gram(&pooled(xs, ys));
    let xi: Vec<usize> = (0..m).collect();
    let yi: Vec<usize> = (m..2 * m).collect();
    Ok(mmd2_u_from_gram(&gram, 2 * m, &xi, &yi))
}

/// Regularized variance estimate
/// `4/m^3 sum_i (sum_j H_ij)^2 - 4/m^4 (sum_ij H_ij)^2 + lambda`
/// over the full `H` matrix, floored at `lambda`.
pub fn variance_hat<K: ScalarKernel + ?Sized>(
    kernel: &K,
    xs: &[f64],
    ys: &[f64],
    lambda: f64,
) -> Result<f64> {
    let m = check_samples(xs, ys)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let gram = kernel.gram(&pooled(xs, ys));
    Ok(variance_from_h(&h_matrix(&gram, m), m, lambda).0)
}

/// Returns `(floored variance, raw value, row sums, total)`.
pub(crate) fn variance_from_h(h: &[f64], m: usize, lambda: f64) -> (f64, f64, Vec<f64>, f64) {
    let rows: Vec<f64> = h.chunks_exact(m).map(|r| r.iter().sum()).collect();
    let total: f64 = rows.iter().sum();
    let mf = m as f64;
    let raw = 4.0 / mf.powi(3) * rows.iter().map(|s| s * s).sum::<f64>()
        - 4.0 / mf.powi(4) * total * total
        + lambda;
    (raw.max(lambda), raw, rows, total)
}
