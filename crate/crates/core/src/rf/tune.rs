use serde::{Deserialize, Serialize};

use super::{fit_forest_rows, Mtry, RfParams};
use crate::dataset::{check_indices, Dataset};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Grid for k-fold tuning of `mtry` and `min_node`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfTuning {
    pub mtry: Vec<Mtry>,
    pub min_node: Vec<usize>,
    pub folds: usize,
}

impl Default for RfTuning {
    fn default() -> Self {
        Self {
            mtry: vec![Mtry::Third, Mtry::Fraction(2.0 / 3.0), Mtry::Fraction(1.0)],
            min_node: vec![5, 20],
            folds: 5,
        }
    }
}

impl RfTuning {
    pub fn validate(&self) -> Result<()> {
        if self.mtry.is_empty() || self.min_node.is_empty() {
            return Err(Error::InvalidParameter("tuning grid is empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    /// Candidate settings, skipping `mtry` values that resolve to the same
    /// count for `p` features.
    pub fn candidates(&self, base: &RfParams, p: usize) -> Vec<RfParams> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for &mtry in &self.mtry {
            let m = mtry.resolve(p);
            if seen.contains(&m) {
                continue;
            }
            seen.push(m);
            out.extend(self.min_node.iter().map(|&min_node| RfParams {
                mtry: Mtry::Fixed(m),
                min_node,
                ..*base
            }));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    pub params: RfParams,
    /// Mean squared cross-validation error per candidate, in grid order.
    pub cv_errors: Vec<(RfParams, f64)>,
}

/// Picks the candidate with the lowest k-fold squared error on `rows`
/// (contiguous folds; the first minimum wins).
pub fn tune_forest(
    data: &Dataset,
    rows: &[usize],
    base: &RfParams,
    grid: &RfTuning,
    seed: u64,
) -> Result<TunedParams> {
    grid.validate()?;
    base.validate()?;
    check_indices(rows, data.n_rows())?;
    let n = rows.len();
    if n < grid.folds {
        return Err(Error::InvalidParameter(format!(
            "cannot run {}-fold CV on {n} rows",
            grid.folds
        )));
    }
    let y = data.response();
    let mut cv_errors = Vec::new();
    for (c, params) in grid
        .candidates(base, data.n_features())
        .into_iter()
        .enumerate()
    {
        params.validate()?;
        let mut sse = 0.0;
        for f in 0..grid.folds {
            let (lo, hi) = (f * n / grid.folds, (f + 1) * n / grid.folds);
            let train: Vec<usize> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
            let forest = fit_forest_rows(
                data,
                &train,
                &params,
                derive_seed(seed, (c * grid.folds + f) as u64),
            )?;
            for &i in &rows[lo..hi] {
                sse += (y[i] - forest.predict(data.row(i))?).powi(2);
            }
        }
        cv_errors.push((params, sse / n as f64));
    }
    let mut best = 0;
    for (c, (_, e)) in cv_errors.iter().enumerate() {
        if *e < cv_errors[best].1 {
            best = c;
        }
    }
    Ok(TunedParams {
        params: cv_errors[best].0,
        cv_errors,
    })
}
