use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RfParams;
use crate::dataset::{check_indices, Dataset};
use crate::error::{Error, Result};

/// Statistics of an internal node.
///
/// Weights are row-count fractions of the tree's training size and
/// variances are population variances (divisor = node count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub depth: usize,
    pub count: usize,
    pub weight: f64,
    pub variance: f64,
    pub left_weight: f64,
    pub left_variance: f64,
    pub right_weight: f64,
    pub right_variance: f64,
}

impl Split {
    pub fn weighted_variance_decrease(&self) -> f64 {
        self.weight * self.variance
            - self.left_weight * self.left_variance
            - self.right_weight * self.right_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal(Split),
    Leaf {
        value: f64,
        count: usize,
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
    train_size: usize,
    depth: usize,
}

impl Tree {
    /// A single-leaf tree that predicts `value` everywhere.
    pub fn constant(value: f64, n_features: usize) -> Tree {
        Tree {
            nodes: vec![Node::Leaf {
                value,
                count: 1,
                depth: 0,
            }],
            n_features,
            train_size: 1,
            depth: 0,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// Depth of the deepest node; the root has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn splits(&self) -> impl Iterator<Item = &Split> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Internal(s) => Some(s),
            Node::Leaf { .. } => None,
        })
    }

    /// Routes `x` to a leaf. The caller guarantees `x.len() == n_features`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Internal(s) => {
                    at = if x[s.feature] <= s.threshold {
                        s.left
                    } else {
                        s.right
                    }
                }
                Node::Leaf { value, .. } => return *value,
            }
        }
    }

    pub(crate) fn add_importance(&self, acc: &mut [f64]) {
        for s in self.splits() {
            acc[s.feature] += s.weighted_variance_decrease();
        }
    }

    /// Shallowest split depth per feature, `None` for unused features.
    pub fn min_split_depths(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_features];
        for s in self.splits() {
            let slot = &mut out[s.feature];
            *slot = Some(slot.map_or(s.depth, |d: usize| d.min(s.depth)));
        }
        out
    }
}

struct Work {
    slot: usize,
    rows: Vec<u32>,
    depth: usize,
}

/// Grows one CART regression tree on `rows` of `data` (duplicates allowed).
pub fn fit_tree<R: Rng + ?Sized>(
    data: &Dataset,
    rows: &[usize],
    params: &RfParams,
    rng: &mut R,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::EmptyNode);
    }
    check_indices(rows, data.n_rows())?;
    params.validate()?;

    let p = data.n_features();
    let m = rows.len();
    let mtry = params.mtry.resolve(p);

    // Column-major copy of the training rows.
    let mut cols = vec![0.0; m * p];
    for (i, &r) in rows.iter().enumerate() {
        for (k, &v) in data.row(r).iter().enumerate() {
            cols[k * m + i] = v;
        }
    }
    let y: Vec<f64> = rows.iter().map(|&r| data.response()[r]).collect();

    let mut nodes: Vec<Node> = vec![Node::Leaf {
        value: 0.0,
        count: 0,
        depth: 0,
    }];
    let mut stack = vec![Work {
        slot: 0,
        rows: (0..m as u32).collect(),
        depth: 0,
    }];
    let mut buf: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut tree_depth = 0;

    while let Some(Work {
        slot,
        rows: idx,
        depth,
    }) = stack.pop()
    {
        tree_depth = tree_depth.max(depth);
        let count = idx.len();
        let (mean, sse) = mean_sse(&y, &idx);
        let leaf = Node::Leaf {
            value: mean,
            count,
            depth,
        };

        let constant = idx.iter().all(|&i| y[i as usize] == y[idx[0] as usize]);
        if count < params.min_node || constant || params.max_depth.is_some_and(|d| depth >= d) {
            nodes[slot] = leaf;
            continue;
        }

        let mut candidates = index::sample(rng, p, mtry).into_vec();
        candidates.sort_unstable();

        // Gain is the drop in sum of squares; with responses centred at the
        // node mean it reduces to s_l^2 * n / (n_l * n_r).
        let floor = sse * 1e-12;
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in &candidates {
            let col = &cols[f * m..(f + 1) * m];
            buf.clear();
            buf.extend(idx.iter().map(|&i| (col[i as usize], y[i as usize] - mean)));
            buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if buf[0].0 == buf[count - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for j in 0..count - 1 {
                left_sum += buf[j].1;
                let (a, b) = (buf[j].0, buf[j + 1].0);
                if a < b {
                    let nl = (j + 1) as f64;
                    let nr = (count - j - 1) as f64;
                    let gain = left_sum * left_sum * count as f64 / (nl * nr);
                    if gain > floor && best.is_none_or(|(_, _, g)| gain > g) {
                        best = Some((f, midpoint(a, b), gain));
                    }
                }
            }
        }

        let Some((feature, threshold, _)) = best else {
            nodes[slot] = leaf;
            continue;
        };

        let col = &cols[feature * m..(feature + 1) * m];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            idx.iter().partition(|&&i| col[i as usize] <= threshold);
        let (_, left_sse) = mean_sse(&y, &left_rows);
        let (_, right_sse) = mean_sse(&y, &right_rows);
        let total = m as f64;
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            value: 0.0,
            count: 0,
            depth: 0,
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            count: 0,
            depth: 0,
        });
        nodes[slot] = Node::Internal(Split {
            feature,
            threshold,
            left,
            right,
            depth,
            count,
            weight: count as f64 / total,
            variance: sse / count as f64,
            left_weight: left_rows.len() as f64 / total,
            left_variance: left_sse / left_rows.len() as f64,
            right_weight: right_rows.len() as f64 / total,
            right_variance: right_sse / right_rows.len() as f64,
        });
        stack.push(Work {
            slot: right,
            rows: right_rows,
            depth: depth + 1,
        });
        stack.push(Work {
            slot: left,
            rows: left_rows,
            depth: depth + 1,
        });
    }

    Ok(Tree {
        nodes,
        n_features: p,
        train_size: m,
        depth: tree_depth,
    })
}

/// Midpoint of two distinct values that always separates them.
fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t < b {
        t
    } else {
        a
    }
}

fn mean_sse(y: &[f64], idx: &[u32]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i as usize]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (y[i as usize] - mean).powi(2)).sum();
    (mean, sse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rf::Mtry;
    use crate::seed::rng_from_seed;

    fn one_feature(x: &[f64], y: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(&rows, y.to_vec()).unwrap()
    }

    fn exact_params() -> RfParams {
        RfParams {
            n_trees: 1,
            mtry: Mtry::Fixed(1),
            min_node: 2,
            max_depth: None,
            bootstrap: false,
        }
    }

    #[test]
    fn four_point_split() {
        let d = one_feature(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 10.0, 10.0]);
        let t = fit_tree(&d, &[0, 1, 2, 3], &exact_params(), &mut rng_from_seed(1)).unwrap();
        let splits: Vec<_> = t.splits().collect();
        assert_eq!(splits.len(), 1);
        let s = splits[0];
        assert_eq!(s.threshold, 0.5);
        assert_eq!(s.variance, 25.0);
        assert_eq!(s.weighted_variance_decrease(), 25.0);
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[1.0]), 10.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn constant_response_is_single_leaf() {
        let d = one_feature(&[1.0, 2.0, 3.0, 4.0], &[3.5; 4]);
        let t = fit_tree(&d, &[0, 1, 2, 3], &exact_params(), &mut rng_from_seed(1)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[100.0]), 3.5);
    }

    #[test]
    fn single_row_and_empty_rows() {
        let d = one_feature(&[1.0], &[-2.0]);
        let t = fit_tree(&d, &[0], &exact_params(), &mut rng_from_seed(1)).unwrap();
        assert_eq!(t.predict(&[0.0]), -2.0);
        assert_eq!(
            fit_tree(&d, &[], &exact_params(), &mut rng_from_seed(1)),
            Err(Error::EmptyNode)
        );
    }

    #[test]
    fn depth_cap_and_min_node_stop() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let d = one_feature(&x, &x);
        let rows: Vec<usize> = (0..16).collect();
        let capped = RfParams {
            max_depth: Some(2),
            ..exact_params()
        };
        let t = fit_tree(&d, &rows, &capped, &mut rng_from_seed(3)).unwrap();
        assert_eq!(t.depth(), 2);
        let coarse = RfParams {
            min_node: 17,
            ..exact_params()
        };
        let t = fit_tree(&d, &rows, &coarse, &mut rng_from_seed(3)).unwrap();
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn constant_column_never_split() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![7.0, i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let d = Dataset::from_rows(&rows, y).unwrap();
        let params = RfParams {
            mtry: Mtry::Fixed(2),
            ..exact_params()
        };
        let t = fit_tree(
            &d,
            &(0..20).collect::<Vec<_>>(),
            &params,
            &mut rng_from_seed(9),
        )
        .unwrap();
        assert!(t.splits().all(|s| s.feature == 1));
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Two identical columns give identical gains.
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y = vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0];
        let d = Dataset::from_rows(&rows, y).unwrap();
        let params = RfParams {
            mtry: Mtry::Fixed(2),
            ..exact_params()
        };
        let t = fit_tree(
            &d,
            &(0..8).collect::<Vec<_>>(),
            &params,
            &mut rng_from_seed(0),
        )
        .unwrap();
        let root = t.splits().next().unwrap();
        assert_eq!(root.feature, 0);
        assert_eq!(root.threshold, 3.5);
    }

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let a = 1.0_f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a <= t && t < b);
    }
}
