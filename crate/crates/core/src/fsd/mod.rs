//! Forward selection by sequential learned-kernel MMD tests on residuals.
//!
//! Features are added in importance order. At step `K` the residuals of a
//! model on the first `K` ranked features are compared with the residuals
//! of a model on all features; the first step whose residual distributions
//! are not distinguishable fixes the selected set.

mod krr;

pub use krr::{fit_krr, fit_krr_cv, median_heuristic, KrrModel, RIDGE_GRID};

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bcfi::{compute_importance, ImportanceReport, Metric};
use crate::dataset::{check_indices, Dataset};
use crate::deep_mmd::{mmd_d_test, KernelTrainConfig, MmdTestConfig, TestResult};
use crate::error::{Error, Result};
use crate::rf::{fit_forest_rows, tune_forest, Forest, RfParams, RfTuning};
use crate::seed::{
    derive_seed, rng_from_seed, TAG_BCFI, TAG_FULL_MODEL, TAG_PARTITION, TAG_REDUCED_MODEL,
    TAG_TEST,
};

/// Anything that maps a feature vector to a prediction.
pub trait Predictor {
    fn n_inputs(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for Forest {
    fn n_inputs(&self) -> usize {
        self.n_features()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        Forest::predict(self, x)
    }
}

/// `y_i - model(x_i)` for each row, where `x_i` is restricted to
/// `feature_subset` (in that order) when one is given.
pub fn residuals<P: Predictor + ?Sized>(
    model: &P,
    data: &Dataset,
    rows: &[usize],
    feature_subset: Option<&[usize]>,
) -> Result<Vec<f64>> {
    check_indices(rows, data.n_rows())?;
    let width = feature_subset.map_or(data.n_features(), <[usize]>::len);
    if width != model.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: model.n_inputs(),
            got: width,
        });
    }
    if let Some(cols) = feature_subset {
        check_indices(cols, data.n_features())?;
    }
    let mut x = Vec::with_capacity(width);
    rows.iter()
        .map(|&i| {
            let pred = match feature_subset {
                Some(cols) => {
                    x.clear();
                    x.extend(cols.iter().map(|&k| data.value(i, k)));
                    model.predict(&x)?
                }
                None => model.predict(data.row(i))?,
            };
            Ok(data.response()[i] - pred)
        })
        .collect()
}

/// Disjoint row subsets: `a0` ranks features, `a3` trains the full model,
/// `a4` the reduced models, and `a1`/`a2` hold the residuals being compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub a0: Vec<usize>,
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub a3: Vec<usize>,
    pub a4: Vec<usize>,
}

impl Partition {
    pub fn parts(&self) -> [&[usize]; 5] {
        [&self.a0, &self.a1, &self.a2, &self.a3, &self.a4]
    }

    /// Checks that the parts are pairwise disjoint, in range, and sized
    /// `(m0, m1, m1, m2, m2)`.
    pub fn verify(&self, n: usize, m0: usize, m1: usize, m2: usize) -> Result<()> {
        let sizes = [m0, m1, m1, m2, m2];
        let mut seen = HashSet::with_capacity(m0 + 2 * m1 + 2 * m2);
        for (part, want) in self.parts().into_iter().zip(sizes) {
            if part.len() != want {
                return Err(Error::InvalidParameter(format!(
                    "partition part has {} rows, expected {want}",
                    part.len()
                )));
            }
            check_indices(part, n)?;
            for &i in part {
                if !seen.insert(i) {
                    return Err(Error::InvalidParameter(format!(
                        "row {i} appears in two partition parts"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws the five parts uniformly without replacement.
pub fn partition_indices<R: Rng + ?Sized>(
    n: usize,
    m0: usize,
    m1: usize,
    m2: usize,
    rng: &mut R,
) -> Result<Partition> {
    let need = m0 + 2 * m1 + 2 * m2;
    if need > n {
        return Err(Error::Infeasible(format!(
            "m0 + 2*m1 + 2*m2 = {need} exceeds the {n} available rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(rng, need);
    let mut it = chosen.chunks(1).map(|c| c[0]);
    let mut take = |k: usize| it.by_ref().take(k).collect::<Vec<usize>>();
    Ok(Partition {
        a0: take(m0),
        a1: take(m1),
        a2: take(m1),
        a3: take(m2),
        a4: take(m2),
    })
}

/// Ridge choice for the one-feature kernel ridge model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrrRidge {
    Fixed(f64),
    CrossValidated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub m0: usize,
    pub m1: usize,
    pub m2: usize,
    pub alpha: f64,
    /// Importance repetitions.
    pub reps: usize,
    pub rf: RfParams,
    pub kernel_train: KernelTrainConfig,
    pub n_perm: usize,
    pub metric: Metric,
    pub seed: u64,
    /// Use kernel ridge regression for the one-feature reduced model;
    /// otherwise every reduced model is a forest.
    pub krr_first: bool,
    pub krr_ridge: KrrRidge,
    /// Test each step at `alpha / p` instead of `alpha`.
    pub bonferroni: bool,
    /// Cross-validated tuning of the full and reduced forests; `None` fits
    /// them with `rf` as given.
    pub tuning: Option<RfTuning>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            m0: 400,
            m1: 400,
            m2: 400,
            alpha: 0.05,
            reps: 100,
            rf: RfParams::default(),
            kernel_train: KernelTrainConfig::default(),
            n_perm: 100,
            metric: Metric::Bcfi,
            seed: 0,
            krr_first: true,
            krr_ridge: KrrRidge::Fixed(1e-3),
            bonferroni: false,
            tuning: Some(RfTuning::default()),
        }
    }
}

impl SelectionConfig {
    /// Rows consumed by the partition.
    pub fn rows_needed(&self) -> usize {
        self.m0 + 2 * self.m1 + 2 * self.m2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.m0 == 0 || self.m2 == 0 {
            return Err(Error::InvalidParameter("m0 and m2 must be positive".into()));
        }
        if self.m1 < 8 {
            return Err(Error::InvalidParameter(format!(
                "m1 must be at least 8, got {}",
                self.m1
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter(
                "repetitions R must be at least 1".into(),
            ));
        }
        if self.n_perm == 0 {
            return Err(Error::InvalidParameter("n_perm must be at least 1".into()));
        }
        if let KrrRidge::Fixed(r) = self.krr_ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "KRR ridge must be >= 0, got {r}"
                )));
            }
        }
        if let Some(t) = &self.tuning {
            t.validate()?;
        }
        self.rf.validate()?;
        self.kernel_train.validate()
    }

    /// Validates the configuration against a dataset with `n` rows.
    pub fn check_feasible(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.rows_needed() > n {
            return Err(Error::Infeasible(format!(
                "m0 + 2*m1 + 2*m2 = {} exceeds the {n} available rows",
                self.rows_needed()
            )));
        }
        Ok(())
    }

    pub fn partition(&self, n: usize) -> Result<Partition> {
        let mut rng = rng_from_seed(derive_seed(self.seed, TAG_PARTITION));
        partition_indices(n, self.m0, self.m1, self.m2, &mut rng)
    }

    /// Fits a forest on `rows`, tuning it first when configured.
    fn fit_model(&self, data: &Dataset, rows: &[usize], seed: u64) -> Result<Forest> {
        let params = match &self.tuning {
            Some(grid) => tune_forest(data, rows, &self.rf, grid, derive_seed(seed, 1))?.params,
            None => self.rf,
        };
        fit_forest_rows(data, rows, &params, seed)
    }

    fn step_alpha(&self, p: usize) -> f64 {
        if self.bonferroni {
            self.alpha / p as f64
        } else {
            self.alpha
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub order: Vec<usize>,
    /// Test at step `K` is `tests[K - 1]`.
    pub tests: Vec<TestResult>,
    pub k_hat: usize,
    /// `order[..k_hat]`
    pub selected: Vec<usize>,
    /// Every step rejected, so all features were kept.
    pub exhausted: bool,
    /// Settings of the full-feature forest.
    pub full_rf: RfParams,
}

fn check_order(order: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for &k in order {
        if k >= p || std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidParameter(
                "feature order is not a permutation".into(),
            ));
        }
    }
    if order.len() != p {
        return Err(Error::InvalidParameter(format!(
            "feature order has {} entries for {p} features",
            order.len()
        )));
    }
    Ok(())
}

/// Residuals on `a2` of the reduced model trained on `a4` over `prefix`.
fn reduced_residuals(
    data: &Dataset,
    prefix: &[usize],
    part: &Partition,
    config: &SelectionConfig,
) -> Result<Vec<f64>> {
    let k = prefix.len();
    if k == 1 && config.krr_first {
        let xs: Vec<f64> = part.a4.iter().map(|&i| data.value(i, prefix[0])).collect();
        let ys: Vec<f64> = part.a4.iter().map(|&i| data.response()[i]).collect();
        let model = match config.krr_ridge {
            KrrRidge::Fixed(ridge) => fit_krr(&xs, &ys, None, ridge)?,
            KrrRidge::CrossValidated => fit_krr_cv(&xs, &ys, None, &RIDGE_GRID, 5)?,
        };
        return residuals(&model, data, &part.a2, Some(prefix));
    }
    let train = data.select_rows(&part.a4)?.select_columns(prefix)?;
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    let seed = derive_seed(derive_seed(config.seed, TAG_REDUCED_MODEL), k as u64);
    let forest = config.fit_model(&train, &rows, seed)?;
    residuals(&forest, data, &part.a2, Some(prefix))
}

/// Sequential tests over the prefixes of `order` with a given partition.
pub fn forward_select_with_partition(
    data: &Dataset,
    order: &[usize],
    part: &Partition,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.check_feasible(data.n_rows())?;
    part.verify(data.n_rows(), config.m0, config.m1, config.m2)?;
    let p = data.n_features();
    check_order(order, p)?;

    let full = config.fit_model(data, &part.a3, derive_seed(config.seed, TAG_FULL_MODEL))?;
    let eta = residuals(&full, data, &part.a1, None)?;
    let test_cfg = MmdTestConfig {
        train: config.kernel_train.clone(),
        n_perm: config.n_perm,
        alpha: config.step_alpha(p),
    };

    let mut tests = Vec::new();
    for k in 1..=p {
        let eta_k = reduced_residuals(data, &order[..k], part, config)?;
        let seed = derive_seed(derive_seed(config.seed, TAG_TEST), k as u64);
        let outcome = mmd_d_test(&eta, &eta_k, &test_cfg, seed)?;
        let reject = outcome.result.reject;
        log::debug!(
            "step {k}: statistic {:.3e}, threshold {:.3e}, p = {:.3}",
            outcome.result.statistic,
            outcome.result.threshold,
            outcome.result.p_value
        );
        tests.push(outcome.result);
        if !reject {
            return Ok(SelectionResult {
                order: order.to_vec(),
                tests,
                k_hat: k,
                selected: order[..k].to_vec(),
                exhausted: false,
                full_rf: *full.params(),
            });
        }
    }
    Ok(SelectionResult {
        order: order.to_vec(),
        tests,
        k_hat: p,
        selected: order.to_vec(),
        exhausted: true,
        full_rf: *full.params(),
    })
}

/// Forward selection along `report.order` using the partition drawn from
/// `config.seed`.
pub fn forward_select(
    data: &Dataset,
    report: &ImportanceReport,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.check_feasible(data.n_rows())?;
    let part = config.partition(data.n_rows())?;
    forward_select_with_partition(data, &report.order, &part, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub partition: Partition,
    pub importance: ImportanceReport,
    pub selection: SelectionResult,
    pub importance_seconds: f64,
    pub selection_seconds: f64,
}

/// Importance ranking on `a0` followed by forward selection.
pub fn run_pipeline(data: &Dataset, config: &SelectionConfig) -> Result<PipelineOutcome> {
    config.check_feasible(data.n_rows())?;
    let partition = config.partition(data.n_rows())?;
    let start = Instant::now();
    let importance = compute_importance(
        data,
        &partition.a0,
        config.reps,
        &config.rf,
        config.metric,
        derive_seed(config.seed, TAG_BCFI),
    )?;
    let importance_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let selection = forward_select_with_partition(data, &importance.order, &partition, config)?;
    Ok(PipelineOutcome {
        partition,
        importance,
        selection,
        importance_seconds,
        selection_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Per-run selection score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub hits: usize,
    pub wrong: usize,
    /// `hits / |true|`
    pub mu_c: f64,
    /// `wrong` as a real, for averaging.
    pub n_w: f64,
}

pub fn evaluate_selection(selected: &[usize], true_features: &[usize]) -> Result<SelectionScore> {
    if true_features.is_empty() {
        return Err(Error::InvalidParameter("true feature set is empty".into()));
    }
    let truth: HashSet<usize> = true_features.iter().copied().collect();
    let chosen: HashSet<usize> = selected.iter().copied().collect();
    let hits = chosen.intersection(&truth).count();
    let wrong = chosen.len() - hits;
    Ok(SelectionScore {
        hits,
        wrong,
        mu_c: hits as f64 / truth.len() as f64,
        n_w: wrong as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rf::{Node, Tree};

    #[test]
    fn partition_sizes_and_bounds() {
        let mut rng = rng_from_seed(1);
        let part = partition_indices(10, 2, 2, 2, &mut rng).unwrap();
        part.verify(10, 2, 2, 2).unwrap();
        let mut all: Vec<usize> = part.parts().concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let part = partition_indices(23, 3, 4, 6, &mut rng).unwrap();
        part.verify(23, 3, 4, 6).unwrap();
        let err = partition_indices(22, 3, 4, 6, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Infeasible(msg) if msg.contains("m0 + 2*m1 + 2*m2")));
    }

    #[test]
    fn verify_catches_overlap() {
        let part = Partition {
            a0: vec![0],
            a1: vec![1],
            a2: vec![2],
            a3: vec![3],
            a4: vec![0],
        };
        assert!(part.verify(5, 1, 1, 1).is_err());
        assert!(part.verify(5, 2, 1, 1).is_err());
    }

    fn constant_forest(value: f64, p: usize) -> Forest {
        Forest::from_trees(vec![Tree::constant(value, p)], RfParams::default(), 0).unwrap()
    }

    #[test]
    fn residuals_of_constant_and_memorizing_models() {
        let data = Dataset::from_rows(
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            vec![1.0, 2.0, 4.0],
        )
        .unwrap();
        let r = residuals(&constant_forest(1.5, 2), &data, &[0, 1, 2], None).unwrap();
        assert_eq!(r, vec![-0.5, 0.5, 2.5]);
        let r = residuals(&constant_forest(1.5, 1), &data, &[2], Some(&[1])).unwrap();
        assert_eq!(r, vec![2.5]);
        assert!(matches!(
            residuals(&constant_forest(1.5, 1), &data, &[0], None),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));

        let one = Dataset::from_rows(&[vec![7.0]], vec![3.25]).unwrap();
        let forest = crate::rf::fit_forest(
            &one,
            &RfParams {
                n_trees: 3,
                ..RfParams::default()
            },
            5,
        )
        .unwrap();
        assert!(forest
            .trees()
            .iter()
            .all(|t| matches!(t.nodes(), [Node::Leaf { .. }])));
        assert_eq!(residuals(&forest, &one, &[0], None).unwrap(), vec![0.0]);
    }

    #[test]
    fn evaluation_examples() {
        let s = evaluate_selection(&[0, 1], &[0, 1]).unwrap();
        assert_eq!((s.mu_c, s.wrong), (1.0, 0));
        let s = evaluate_selection(&[1, 0, 7], &[0, 1]).unwrap();
        assert_eq!((s.mu_c, s.wrong), (1.0, 1));
        let s = evaluate_selection(&[], &[0, 1]).unwrap();
        assert_eq!((s.mu_c, s.wrong), (0.0, 0));
        let s = evaluate_selection(&[1, 4], &[0, 1]).unwrap();
        assert_eq!((s.hits, s.mu_c, s.n_w), (1, 0.5, 1.0));
        assert!(evaluate_selection(&[0], &[]).is_err());
    }

    #[test]
    fn order_must_be_a_permutation() {
        assert!(check_order(&[2, 0, 1], 3).is_ok());
        assert!(check_order(&[0, 0, 1], 3).is_err());
        assert!(check_order(&[0, 1], 3).is_err());
        assert!(check_order(&[0, 1, 3], 3).is_err());
    }

    #[test]
    fn config_checks() {
        let cfg = SelectionConfig::default();
        assert_eq!(cfg.rows_needed(), 2000);
        assert!(cfg.check_feasible(2000).is_ok());
        assert!(matches!(
            cfg.check_feasible(1999),
            Err(Error::Infeasible(_))
        ));
        assert!(SelectionConfig {
            alpha: 1.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(SelectionConfig {
            m1: 7,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(SelectionConfig {
            krr_ridge: KrrRidge::Fixed(-1.0),
            ..cfg
        }
        .validate()
        .is_err());
    }
}
