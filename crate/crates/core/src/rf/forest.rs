use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_tree, RfParams, Tree};
use crate::dataset::{check_indices, Dataset};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// A bagged ensemble of regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    params: RfParams,
    train_size: usize,
    n_features: usize,
    seed: u64,
}

/// Fits a forest on every row of `data`.
pub fn fit_forest(data: &Dataset, params: &RfParams, seed: u64) -> Result<Forest> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    fit_forest_rows(data, &rows, params, seed)
}

/// Fits a forest on the given rows. Tree `b` draws its bootstrap sample and
/// its candidate features from the stream `(seed, b)`, so the result does not
/// depend on the thread pool.
pub fn fit_forest_rows(
    data: &Dataset,
    rows: &[usize],
    params: &RfParams,
    seed: u64,
) -> Result<Forest> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyNode);
    }
    check_indices(rows, data.n_rows())?;
    let m = rows.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            if params.bootstrap {
                let sample: Vec<usize> = (0..m).map(|_| rows[rng.random_range(0..m)]).collect();
                fit_tree(data, &sample, params, &mut rng)
            } else {
                fit_tree(data, rows, params, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        params: *params,
        train_size: m,
        n_features: data.n_features(),
        seed,
    })
}

impl Forest {
    /// Assembles a forest from already-grown trees.
    pub fn from_trees(trees: Vec<Tree>, params: RfParams, seed: u64) -> Result<Forest> {
        let first = trees
            .first()
            .ok_or_else(|| Error::InvalidParameter("forest needs a tree".into()))?;
        let n_features = first.n_features();
        if let Some(t) = trees.iter().find(|t| t.n_features() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: t.n_features(),
            });
        }
        let train_size = first.train_size();
        let params = RfParams {
            n_trees: trees.len(),
            ..params
        };
        Ok(Forest {
            trees,
            params,
            train_size,
            n_features,
            seed,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &RfParams {
        &self.params
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean of the per-tree leaf values at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Impurity importance: per-feature sum of variance decreases over all
    /// splits, divided by the number of trees.
    pub fn importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            t.add_importance(&mut acc);
        }
        let b = self.trees.len() as f64;
        acc.iter_mut().for_each(|v| *v /= b);
        acc
    }

    /// Mean over trees of the shallowest depth at which each feature splits.
    /// A tree that never uses a feature contributes its own depth + 1.
    /// Smaller is more important.
    pub fn min_depth_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            let penalty = t.depth() + 1;
            for (a, d) in acc.iter_mut().zip(t.min_split_depths()) {
                *a += d.unwrap_or(penalty) as f64;
            }
        }
        let b = self.trees.len() as f64;
        acc.iter_mut().for_each(|v| *v /= b);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rf::Mtry;
    use crate::seed::rng_from_seed;

    fn four_point() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0], vec![0.0], vec![1.0], vec![1.0]],
            vec![0.0, 0.0, 10.0, 10.0],
        )
        .unwrap()
    }

    fn single_tree_params() -> RfParams {
        RfParams {
            n_trees: 1,
            mtry: Mtry::Fixed(1),
            min_node: 2,
            max_depth: None,
            bootstrap: false,
        }
    }

    #[test]
    fn one_tree_forest_matches_tree() {
        let d = four_point();
        let params = single_tree_params();
        let f = fit_forest(&d, &params, 11).unwrap();
        let t = fit_tree(&d, &[0, 1, 2, 3], &params, &mut rng_from_seed(0)).unwrap();
        for x in [-1.0, 0.0, 0.4, 0.6, 1.0, 2.0] {
            assert_eq!(f.predict(&[x]).unwrap(), t.predict(&[x]));
        }
        assert_eq!(f.importance(), vec![25.0]);
        assert_eq!(f.min_depth_importance(), vec![0.0]);
    }

    #[test]
    fn averaging_and_constant_leaves() {
        let f = Forest::from_trees(vec![Tree::constant(5.0, 3)], RfParams::default(), 0).unwrap();
        assert_eq!(f.predict(&[1.0, -4.0, 9.0]).unwrap(), 5.0);
        let f = Forest::from_trees(
            vec![Tree::constant(2.0, 1), Tree::constant(4.0, 1)],
            RfParams::default(),
            0,
        )
        .unwrap();
        assert_eq!(f.predict(&[0.0]).unwrap(), 3.0);
        assert_eq!(f.params().n_trees, 2);
        assert!(matches!(
            f.predict(&[0.0, 1.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn unused_feature_gets_depth_penalty() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![[0.0, 0.0, 1.0, 1.0][i], 3.0]).collect();
        let d = Dataset::from_rows(&rows, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        let params = RfParams {
            mtry: Mtry::Fixed(2),
            ..single_tree_params()
        };
        let f = fit_forest(&d, &params, 0).unwrap();
        assert_eq!(f.min_depth_importance(), vec![0.0, 2.0]);
        assert_eq!(f.importance(), vec![25.0, 0.0]);
    }

    #[test]
    fn constant_response_has_zero_importance() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64, (i * 7 % 11) as f64])
            .collect();
        let d = Dataset::from_rows(&rows, vec![1.25; 30]).unwrap();
        let f = fit_forest(
            &d,
            &RfParams {
                n_trees: 10,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        assert_eq!(f.importance(), vec![0.0, 0.0]);
    }

    #[test]
    fn memorizes_pure_training_set() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..12).map(|i| ((i * 5) % 7) as f64).collect();
        let d = Dataset::from_rows(&rows, y.clone()).unwrap();
        let f = fit_forest(&d, &single_tree_params(), 2).unwrap();
        for (r, target) in rows.iter().zip(&y) {
            assert_eq!(f.predict(r).unwrap(), *target);
        }
    }
}
