use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{Error, Result};

/// Gaussian-kernel ridge regression on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    centers: Vec<f64>,
    coef: Vec<f64>,
    lengthscale: f64,
    ridge: f64,
}

impl KrrModel {
    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn predict_scalar(&self, x: f64) -> f64 {
        let denom = 2.0 * self.lengthscale * self.lengthscale;
        self.centers
            .iter()
            .zip(&self.coef)
            .map(|(c, w)| w * (-(x - c) * (x - c) / denom).exp())
            .sum()
    }
}

impl Predictor for KrrModel {
    fn n_inputs(&self) -> usize {
        1
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        match x {
            [v] => Ok(self.predict_scalar(*v)),
            _ => Err(Error::DimensionMismatch {
                expected: 1,
                got: x.len(),
            }),
        }
    }
}

/// Median of `|x_i - x_j|` over distinct pairs, or 1 when that is zero.
pub fn median_heuristic(xs: &[f64]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(xs.len() * xs.len().saturating_sub(1) / 2);
    for (i, a) in xs.iter().enumerate() {
        d.extend(xs[i + 1..].iter().map(|b| (a - b).abs()));
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, v, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *v > 0.0 {
        *v
    } else {
        1.0
    }
}

/// Solves `(G + ridge I) c = y` for the Gaussian Gram matrix `G`.
/// `lengthscale = None` uses the median heuristic.
pub fn fit_krr(xs: &[f64], ys: &[f64], lengthscale: Option<f64>, ridge: f64) -> Result<KrrModel> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter(
            "kernel ridge regression needs data".into(),
        ));
    }
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    let lengthscale = lengthscale.unwrap_or_else(|| median_heuristic(xs));
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lengthscale must be positive, got {lengthscale}"
        )));
    }
    let n = xs.len();
    let denom = 2.0 * lengthscale * lengthscale;
    let g = DMatrix::from_fn(n, n, |i, j| {
        let k = (-(xs[i] - xs[j]) * (xs[i] - xs[j]) / denom).exp();
        if i == j {
            k + ridge
        } else {
            k
        }
    });
    let y = DVector::from_column_slice(ys);
    let coef = match g.clone().cholesky() {
        Some(chol) => chol.solve(&y),
        None if ridge == 0.0 => {
            return Err(Error::Singular(
                "Gram matrix is not positive definite; use ridge > 0".into(),
            ))
        }
        None => g.lu().solve(&y).ok_or_else(|| {
            Error::Singular(format!("system with ridge {ridge} could not be solved"))
        })?,
    };
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular(
            "non-finite coefficients; use a larger ridge".into(),
        ));
    }
    Ok(KrrModel {
        centers: xs.to_vec(),
        coef: coef.as_slice().to_vec(),
        lengthscale,
        ridge,
    })
}

pub const RIDGE_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Picks the ridge from `grid` by `folds`-fold cross-validated squared error
/// (contiguous folds, first minimum wins) and refits on all points.
pub fn fit_krr_cv(
    xs: &[f64],
    ys: &[f64],
    lengthscale: Option<f64>,
    grid: &[f64],
    folds: usize,
) -> Result<KrrModel> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if folds < 2 || xs.len() < folds {
        return Err(Error::InvalidParameter(format!(
            "cannot run {folds}-fold CV on {} points",
            xs.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty ridge grid".into()));
    }
    let lengthscale = lengthscale.unwrap_or_else(|| median_heuristic(xs));
    let n = xs.len();
    let mut best = (f64::INFINITY, grid[0]);
    for &ridge in grid {
        let mut sse = 0.0;
        for f in 0..folds {
            let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
            let train_x: Vec<f64> = xs[..lo].iter().chain(&xs[hi..]).copied().collect();
            let train_y: Vec<f64> = ys[..lo].iter().chain(&ys[hi..]).copied().collect();
            let model = fit_krr(&train_x, &train_y, Some(lengthscale), ridge)?;
            sse += (lo..hi)
                .map(|i| (ys[i] - model.predict_scalar(xs[i])).powi(2))
                .sum::<f64>();
        }
        if sse < best.0 {
            best = (sse, ridge);
        }
    }
    fit_krr(xs, ys, Some(lengthscale), best.1)
}
