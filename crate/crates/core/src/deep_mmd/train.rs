use serde::{Deserialize, Serialize};

use super::{check_samples, h_matrix, pooled, sigmoid, variance_from_h, KernelParams, Mlp};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Variance regularizer added to the ratio's denominator.
    pub lambda: f64,
    pub seed: u64,
    pub widths: Vec<usize>,
    /// Whether the mixing weight is trained or held at its initial value.
    pub train_mixing: bool,
}

impl Default for KernelTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 5e-4,
            lambda: 1e-8,
            seed: 0,
            widths: vec![1, 32, 32, 8],
            train_mixing: true,
        }
    }
}

impl KernelTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "learning rate must be positive".into(),
            ));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if self.widths.len() < 2 || self.widths[0] != 1 || self.widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "layer widths must start at 1 and be nonzero, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedKernel {
    pub params: KernelParams,
    /// Set when every training point was identical; `params` is then the
    /// untrained initialization.
    pub degenerate: bool,
    /// Objective before each epoch, followed by the final value.
    pub objective_trace: Vec<f64>,
}

const INIT_MIXING: f64 = 0.1;
/// Median-heuristic inputs are capped at this many points.
const MEDIAN_POINTS: usize = 1024;

fn median_pairwise_distance(points: &[f64], dim: usize) -> f64 {
    let n = (points.len() / dim).min(MEDIAN_POINTS);
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        let pa = &points[a * dim..(a + 1) * dim];
        for b in a + 1..n {
            let pb = &points[b * dim..(b + 1) * dim];
            d.push(
                pa.iter()
                    .zip(pb)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, v, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *v
}

/// Initial kernel: He-scaled MLP, median-heuristic lengthscales on the
/// extracted features and on the raw inputs, mixing weight 0.1.
/// The flag is set when all inputs coincide.
pub fn init_kernel(
    xs: &[f64],
    ys: &[f64],
    config: &KernelTrainConfig,
) -> Result<(KernelParams, bool)> {
    config.validate()?;
    let z = pooled(xs, ys);
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let degenerate = z.iter().all(|&v| v == z[0]);
    let scale = if degenerate || sd.is_nan() || sd <= 0.0 {
        1.0
    } else {
        sd
    };

    let mut rng = rng_from_seed(config.seed);
    let mlp = Mlp::init(&config.widths, mean, scale, &mut rng)?;
    let (sigma_phi, sigma_q) = if degenerate {
        (1.0, 1.0)
    } else {
        let feats = mlp.forward_batch(&z);
        let sp = median_pairwise_distance(feats.output(), mlp.output_dim());
        let sq = median_pairwise_distance(&z, 1);
        (
            if sp > 0.0 { sp } else { 1.0 },
            if sq > 0.0 { sq } else { scale },
        )
    };
    let params = KernelParams {
        mlp,
        log_sigma_phi: sigma_phi.ln(),
        log_sigma_q: sigma_q.ln(),
        logit_eps: (INIT_MIXING / (1.0 - INIT_MIXING)).ln(),
    };
    Ok((params, degenerate))
}

/// Training objective `mmd2_u / sqrt(variance_hat)`.
pub fn objective(params: &KernelParams, xs: &[f64], ys: &[f64], lambda: f64) -> Result<f64> {
    let m = check_samples(xs, ys)?;
    let gram = params.gram_with_features(&pooled(xs, ys));
    let h = h_matrix(&gram, m);
    Ok(ratio_from_h(&h, m, lambda))
}

fn ratio_from_h(h: &[f64], m: usize, lambda: f64) -> f64 {
    let trace: f64 = (0..m).map(|i| h[i * m + i]).sum();
    let total: f64 = h.iter().sum();
    let mmd = (total - trace) / (m * (m - 1)) as f64;
    let (var, ..) = variance_from_h(h, m, lambda);
    mmd / var.sqrt()
}

/// Objective and its exact gradient with respect to
/// [`KernelParams::to_flat`].
pub fn objective_and_gradient(
    params: &KernelParams,
    xs: &[f64],
    ys: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let m = check_samples(xs, ys)?;
    let n = 2 * m;
    let z = pooled(xs, ys);
    let cache = params.mlp.forward_batch(&z);
    let phi = cache.output();
    let d = params.mlp.output_dim();
    let (sp, sq, eps) = (params.sigma_phi(), params.sigma_q(), params.eps());
    let (sp2, sq2) = (sp * sp, sq * sq);

    // Upper-triangle pair quantities, stored at a * n + b.
    let mut gram = vec![0.0; n * n];
    let mut gauss_phi = vec![0.0; n * n];
    let mut dist_phi = vec![0.0; n * n];
    let mut gauss_q = vec![0.0; n * n];
    let mut dist_q = vec![0.0; n * n];
    for a in 0..n {
        gram[a * n + a] = 1.0;
        let fa = &phi[a * d..(a + 1) * d];
        for b in a + 1..n {
            let fb = &phi[b * d..(b + 1) * d];
            let dp: f64 = fa.iter().zip(fb).map(|(u, v)| (u - v) * (u - v)).sum();
            let dq = (z[a] - z[b]) * (z[a] - z[b]);
            let ga = (-dp / (2.0 * sp2)).exp();
            let gq = (-dq / (2.0 * sq2)).exp();
            let k = ((1.0 - eps) * ga + eps) * gq;
            let at = a * n + b;
            gram[at] = k;
            gram[b * n + a] = k;
            gauss_phi[at] = ga;
            dist_phi[at] = dp;
            gauss_q[at] = gq;
            dist_q[at] = dq;
        }
    }

    let h = h_matrix(&gram, m);
    let trace: f64 = (0..m).map(|i| h[i * m + i]).sum();
    let total_h: f64 = h.iter().sum();
    let mf = m as f64;
    let mmd = (total_h - trace) / (mf * (mf - 1.0));
    let (var, raw, rows, total) = variance_from_h(&h, m, lambda);
    let j = mmd / var.sqrt();

    // dJ/dH_ij
    let inv_sd = 1.0 / var.sqrt();
    let dj_dvar = if raw < lambda {
        0.0
    } else {
        -0.5 * mmd / (var * var.sqrt())
    };
    let off_diag = inv_sd / (mf * (mf - 1.0));
    // dJ with respect to the kernel value of each ordered pair.
    let mut dk = vec![0.0; n * n];
    for i in 0..m {
        let dvar_row = 8.0 * rows[i] / mf.powi(3) - 8.0 * total / mf.powi(4);
        for jj in 0..m {
            let g = if i == jj { 0.0 } else { off_diag } + dj_dvar * dvar_row;
            dk[i * n + jj] += g;
            dk[(m + i) * n + m + jj] += g;
            dk[i * n + m + jj] -= g;
            dk[jj * n + m + i] -= g;
        }
    }

    let mut g_phi = vec![0.0; n * d];
    let (mut g_log_sp, mut g_log_sq, mut g_eps) = (0.0, 0.0, 0.0);
    for a in 0..n {
        for b in a + 1..n {
            let at = a * n + b;
            let w = dk[at] + dk[b * n + a];
            if w == 0.0 {
                continue;
            }
            let (ga, gq, k) = (gauss_phi[at], gauss_q[at], gram[at]);
            g_eps += w * (1.0 - ga) * gq;
            g_log_sq += w * k * dist_q[at] / sq2;
            let c = w * (1.0 - eps) * gq * ga / sp2;
            g_log_sp += c * dist_phi[at];
            for t in 0..d {
                let diff = phi[a * d + t] - phi[b * d + t];
                g_phi[a * d + t] -= c * diff;
                g_phi[b * d + t] += c * diff;
            }
        }
    }

    let mut grad = params.mlp.backward(&cache, &g_phi);
    grad.extend([g_log_sp, g_log_sq, g_eps * eps * (1.0 - eps)]);
    Ok((j, grad))
}

/// Adam gradient ascent on the objective over full batches.
pub fn train_kernel(
    train_xs: &[f64],
    train_ys: &[f64],
    config: &KernelTrainConfig,
) -> Result<TrainedKernel> {
    let m = check_samples(train_xs, train_ys)?;
    if m < 4 {
        return Err(Error::InvalidParameter(format!(
            "kernel training needs at least 4 points per sample, got {m}"
        )));
    }
    let (mut params, degenerate) = init_kernel(train_xs, train_ys, config)?;
    if degenerate {
        log::warn!("all kernel training points are identical; returning the initial kernel");
        return Ok(TrainedKernel {
            params,
            degenerate,
            objective_trace: Vec::new(),
        });
    }

    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const ADAM_EPS: f64 = 1e-8;
    let mut theta = params.to_flat();
    let k = theta.len();
    let mut first = vec![0.0; k];
    let mut second = vec![0.0; k];
    let mut trace = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..config.epochs {
        let (j, mut grad) = objective_and_gradient(&params, train_xs, train_ys, config.lambda)?;
        if !j.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::warn!("kernel objective became non-finite at epoch {epoch}; stopping early");
            break;
        }
        trace.push(j);
        if !config.train_mixing {
            grad[k - 1] = 0.0;
        }
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        for i in 0..k {
            first[i] = BETA1 * first[i] + (1.0 - BETA1) * grad[i];
            second[i] = BETA2 * second[i] + (1.0 - BETA2) * grad[i] * grad[i];
            theta[i] +=
                config.learning_rate * (first[i] / c1) / ((second[i] / c2).sqrt() + ADAM_EPS);
        }
        params.set_flat(&theta);
    }
    if config.epochs > 0 {
        trace.push(objective(&params, train_xs, train_ys, config.lambda)?);
    }
    debug_assert!(sigmoid(params.logit_eps) > 0.0);
    Ok(TrainedKernel {
        params,
        degenerate: false,
        objective_trace: trace,
    })
}
