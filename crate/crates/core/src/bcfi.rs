//! Shadow-feature debiasing of impurity importance.
//!
//! Each repetition appends a shadow block to the subsample: the original
//! feature rows under one random permutation of row order. Shadows keep
//! every marginal and the dependence between features but carry no signal,
//! so `importance(k) - importance(shadow k)` removes the bias impurity
//! importance has toward features with many distinct values.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_indices, Dataset};
use crate::error::{Error, Result};
use crate::rf::{fit_forest, RfParams};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Bias-corrected impurity importance, ranked descending.
    #[default]
    Bcfi,
    /// Mean minimal split depth, ranked ascending.
    MinDepth,
}

impl Metric {
    pub fn ascending(self) -> bool {
        matches!(self, Metric::MinDepth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric: Metric,
    /// Per-feature score averaged over repetitions.
    pub values: Vec<f64>,
    /// One row of per-feature scores per repetition.
    pub per_rep: Vec<Vec<f64>>,
    /// Features from most to least important.
    pub order: Vec<usize>,
}

impl ImportanceReport {
    pub fn from_repetitions(metric: Metric, per_rep: Vec<Vec<f64>>) -> Result<Self> {
        let p = per_rep
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidParameter("no repetitions".into()))?;
        if per_rep.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidParameter("ragged repetition rows".into()));
        }
        let r = per_rep.len() as f64;
        let values: Vec<f64> = (0..p)
            .map(|k| per_rep.iter().map(|row| row[k]).sum::<f64>() / r)
            .collect();
        let order = rank_features(&values, metric.ascending());
        Ok(Self {
            metric,
            values,
            per_rep,
            order,
        })
    }
}

/// Stable ranking; ties keep ascending feature index.
pub fn rank_features(values: &[f64], ascending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        values[*a]
            .partial_cmp(&values[*b])
            .unwrap_or(Ordering::Equal)
    };
    if ascending {
        order.sort_by(cmp);
    } else {
        order.sort_by(|a, b| cmp(b, a));
    }
    order
}

/// Appends `p` shadow columns holding the feature rows under a single
/// uniform row permutation. The response is unchanged.
pub fn shadow_augment<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Dataset {
    let n = data.n_rows();
    let p = data.n_features();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);

    let mut features = Vec::with_capacity(n * 2 * p);
    for (i, &src) in perm.iter().enumerate() {
        features.extend_from_slice(data.row(i));
        features.extend_from_slice(data.row(src));
    }
    let mut taken: HashSet<String> = data.names().iter().cloned().collect();
    let mut names = data.names().to_vec();
    for name in data.names() {
        let mut shadow = format!("shadow_{name}");
        while taken.contains(&shadow) {
            shadow.insert(0, '_');
        }
        taken.insert(shadow.clone());
        names.push(shadow);
    }
    Dataset::new(features, names, data.response().to_vec())
        .expect("shadow columns preserve dataset invariants")
}

/// Draws `m` distinct row indices uniformly from `0..n`.
pub fn sample_subset<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::Infeasible(format!(
            "subsample size {m} exceeds {n} rows"
        )));
    }
    Ok(rand::seq::index::sample(rng, n, m).into_vec())
}

fn validate_subset(data: &Dataset, subset: &[usize], reps: usize) -> Result<Dataset> {
    if subset.len() > data.n_rows() {
        return Err(Error::Infeasible(format!(
            "m0 = {} exceeds n = {}",
            subset.len(),
            data.n_rows()
        )));
    }
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty importance subsample".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "repetitions R must be at least 1".into(),
        ));
    }
    check_indices(subset, data.n_rows())?;
    data.select_rows(subset)
}

/// Bias-corrected feature importance on the rows in `subset`.
///
/// Repetition `r` redraws the shadow permutation and refits the forest
/// from seeds derived from `(seed, r)`.
pub fn compute_bcfi(
    data: &Dataset,
    subset: &[usize],
    reps: usize,
    params: &RfParams,
    seed: u64,
) -> Result<ImportanceReport> {
    let sub = validate_subset(data, subset, reps)?;
    let p = sub.n_features();
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(seed, r as u64);
            let mut rng = rng_from_seed(rep_seed);
            let augmented = shadow_augment(&sub, &mut rng);
            // Trees break exact gain ties toward the lowest column, and small
            // nodes tie often. Fitting on shuffled columns keeps those ties
            // from favouring the originals over their shadows.
            let mut layout: Vec<usize> = (0..2 * p).collect();
            layout.shuffle(&mut rng);
            let shuffled = augmented.select_columns(&layout)?;
            let forest = fit_forest(&shuffled, params, derive_seed(rep_seed, 1))?;
            let mut imp = vec![0.0; 2 * p];
            for (&col, v) in layout.iter().zip(forest.importance()) {
                imp[col] = v;
            }
            Ok((0..p).map(|k| imp[k] - imp[p + k]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ImportanceReport::from_repetitions(Metric::Bcfi, per_rep)
}

/// Minimal-depth ranking on the rows in `subset`, one forest per repetition.
pub fn compute_min_depth(
    data: &Dataset,
    subset: &[usize],
    reps: usize,
    params: &RfParams,
    seed: u64,
) -> Result<ImportanceReport> {
    let sub = validate_subset(data, subset, reps)?;
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| {
            Ok(
                fit_forest(&sub, params, derive_seed(derive_seed(seed, r as u64), 1))?
                    .min_depth_importance(),
            )
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ImportanceReport::from_repetitions(Metric::MinDepth, per_rep)
}

pub fn compute_importance(
    data: &Dataset,
    subset: &[usize],
    reps: usize,
    params: &RfParams,
    metric: Metric,
    seed: u64,
) -> Result<ImportanceReport> {
    match metric {
        Metric::Bcfi => compute_bcfi(data, subset, reps, params, seed),
        Metric::MinDepth => compute_min_depth(data, subset, reps, params, seed),
    }
}
