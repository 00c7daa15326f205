use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_samples, mmd2_u_from_gram, pooled, train_kernel, KernelTrainConfig, ScalarKernel,
    TrainedKernel,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub perm_stats: Vec<f64>,
    /// Order statistic of `perm_stats` that the statistic must exceed;
    /// `+inf` when `alpha` is too small for the number of permutations.
    pub threshold: f64,
    /// `(1 + #{perm >= statistic}) / (1 + n_perm)`
    pub p_value: f64,
    pub reject: bool,
}

/// Permutation test of equal distributions with a fixed kernel.
///
/// The statistic is compared against the `ceil((1 - alpha)(n_perm + 1))`-th
/// smallest permuted statistic, which rejects exactly when
/// `p_value <= alpha`. Replica `r` shuffles with the stream `(seed, r)`.
pub fn permutation_test<K: ScalarKernel + ?Sized>(
    kernel: &K,
    xs: &[f64],
    ys: &[f64],
    n_perm: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestResult> {
    let m = check_samples(xs, ys)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if n_perm == 0 {
        return Err(Error::InvalidParameter("n_perm must be at least 1".into()));
    }
    let n = 2 * m;
    let gram = kernel.gram(&pooled(xs, ys));
    let xi: Vec<usize> = (0..m).collect();
    let yi: Vec<usize> = (m..n).collect();
    let statistic = mmd2_u_from_gram(&gram, n, &xi, &yi);

    let perm_stats: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut stream_rng(seed, r as u64));
            mmd2_u_from_gram(&gram, n, &idx[..m], &idx[m..])
        })
        .collect();

    let exceed = perm_stats.iter().filter(|&&s| s >= statistic).count();
    let p_value = (1 + exceed) as f64 / (1 + n_perm) as f64;

    // k = n_perm + 1 - floor(alpha (n_perm + 1)); the tolerance keeps
    // products like 0.05 * 20 from rounding below an integer.
    let tail = (alpha * (n_perm + 1) as f64 + 1e-9).floor() as usize;
    let k = n_perm + 1 - tail;
    let threshold = if k > n_perm {
        f64::INFINITY
    } else {
        let mut sorted = perm_stats.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        sorted[k - 1]
    };
    Ok(TestResult {
        statistic,
        perm_stats,
        threshold,
        p_value,
        reject: statistic > threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdTestConfig {
    pub train: KernelTrainConfig,
    pub n_perm: usize,
    pub alpha: f64,
}

impl Default for MmdTestConfig {
    fn default() -> Self {
        Self {
            train: KernelTrainConfig::default(),
            n_perm: 100,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdTestOutcome {
    pub kernel: TrainedKernel,
    pub result: TestResult,
}

/// Learned-kernel two-sample test.
///
/// The first half of each sample trains the kernel and the second half is
/// tested, so the permutation null is not distorted by kernel selection.
/// Training uses seed `(seed, 0)` and the permutations `(seed, 1)`; the
/// seed inside `config.train` is ignored.
pub fn mmd_d_test(
    xs: &[f64],
    ys: &[f64],
    config: &MmdTestConfig,
    seed: u64,
) -> Result<MmdTestOutcome> {
    let m = check_samples(xs, ys)?;
    if m < 8 {
        return Err(Error::InvalidParameter(format!(
            "learned-kernel test needs at least 8 points per sample, got {m}"
        )));
    }
    let half = m / 2;
    let train_cfg = KernelTrainConfig {
        seed: derive_seed(seed, 0),
        ..config.train.clone()
    };
    let kernel = train_kernel(&xs[..half], &ys[..half], &train_cfg)?;
    let result = permutation_test(
        &kernel.params,
        &xs[half..],
        &ys[half..],
        config.n_perm,
        config.alpha,
        derive_seed(seed, 1),
    )?;
    Ok(MmdTestOutcome { kernel, result })
}
