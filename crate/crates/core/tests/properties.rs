use forestmmd::deep_mmd::{mmd2_u, GaussianKernel};
use forestmmd::fsd::{evaluate_selection, partition_indices};
use forestmmd::rf::{fit_tree, Node, RfParams};
use forestmmd::seed::rng_from_seed;
use forestmmd::Dataset;
use proptest::prelude::*;

proptest! {
    #[test]
    fn partition_is_disjoint_and_sized(m0 in 0usize..20, m1 in 0usize..20, m2 in 0usize..20, extra in 0usize..10, seed: u64) {
        let n = m0 + 2 * m1 + 2 * m2 + extra;
        let part = partition_indices(n, m0, m1, m2, &mut rng_from_seed(seed)).unwrap();
        part.verify(n, m0, m1, m2).unwrap();
        let again = partition_indices(n, m0, m1, m2, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(&part, &again);
        let need = m0 + 2 * m1 + 2 * m2;
        if need > 0 {
            prop_assert!(partition_indices(need - 1, m0, m1, m2, &mut rng_from_seed(seed)).is_err());
        }
    }

    #[test]
    fn mmd_is_symmetric_and_zero_on_equal_samples(xs in prop::collection::vec(-5.0f64..5.0, 2..15), bw in 0.2f64..4.0) {
        let k = GaussianKernel { bandwidth: bw };
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + 1.0).collect();
        let a = mmd2_u(&k, &xs, &ys).unwrap();
        let b = mmd2_u(&k, &ys, &xs).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert_eq!(mmd2_u(&k, &xs, &xs).unwrap(), 0.0);
    }

    #[test]
    fn tree_children_partition_their_parent(seed: u64, n in 2usize..60) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a = ((seed.wrapping_add(i as u64 * 7919)) % 97) as f64;
            let b = ((seed.wrapping_mul(31).wrapping_add(i as u64 * 104_729)) % 13) as f64;
            rows.push(vec![a, b]);
            y.push(a.sin() + b);
        }
        let data = Dataset::from_rows(&rows, y).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let params = RfParams { min_node: 2, ..RfParams::default() };
        let tree = fit_tree(&data, &idx, &params, &mut rng_from_seed(seed)).unwrap();
        let count = |at: usize| match &tree.nodes()[at] {
            Node::Internal(s) => s.count,
            Node::Leaf { count, .. } => *count,
        };
        prop_assert_eq!(count(0), n);
        let mut leaves = 0;
        for node in tree.nodes() {
            match node {
                Node::Internal(s) => {
                    prop_assert_eq!(count(s.left) + count(s.right), s.count);
                    prop_assert!((s.left_weight + s.right_weight - s.weight).abs() < 1e-12);
                    prop_assert!(s.weighted_variance_decrease() >= -1e-12);
                }
                Node::Leaf { count, .. } => {
                    prop_assert!(*count >= 1);
                    leaves += count;
                }
            }
        }
        prop_assert_eq!(leaves, n);
    }

    #[test]
    fn selection_scores_are_bounded(selected in prop::collection::hash_set(0usize..20, 0..20), truth in prop::collection::hash_set(0usize..20, 1..5)) {
        let sel: Vec<usize> = selected.iter().copied().collect();
        let tru: Vec<usize> = truth.iter().copied().collect();
        let s = evaluate_selection(&sel, &tru).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.mu_c));
        prop_assert_eq!(s.hits + s.wrong, sel.len());
        prop_assert_eq!(s.hits, sel.iter().filter(|k| truth.contains(k)).count());
    }
}
