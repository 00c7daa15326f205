use forestmmd::bcfi::{compute_importance, Metric};
use forestmmd::deep_mmd::KernelTrainConfig;
use forestmmd::fsd::{forward_select, residuals, run_pipeline, SelectionConfig};
use forestmmd::rf::RfParams;
use forestmmd::synth::{gen_model, ModelSpec};

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn small_config(seed: u64) -> SelectionConfig {
    SelectionConfig {
        m0: 150,
        m1: 100,
        m2: 150,
        reps: 5,
        rf: RfParams {
            n_trees: 40,
            ..RfParams::default()
        },
        kernel_train: KernelTrainConfig {
            epochs: 40,
            ..KernelTrainConfig::default()
        },
        n_perm: 50,
        seed,
        ..SelectionConfig::default()
    }
}

#[test]
fn full_model_residuals_are_close_to_the_noise() {
    let syn = gen_model(&ModelSpec {
        model_id: 2,
        n: 2000,
        p: 50,
        correlated: false,
        seed: 4,
    })
    .unwrap();
    let cfg = SelectionConfig {
        seed: 4,
        ..SelectionConfig::default()
    };
    let part = cfg.partition(2000).unwrap();
    let grid = cfg.tuning.clone().unwrap();
    let tuned = forestmmd::rf::tune_forest(&syn.data, &part.a3, &cfg.rf, &grid, 9).unwrap();
    let forest = forestmmd::rf::fit_forest_rows(&syn.data, &part.a3, &tuned.params, 10).unwrap();
    let eta = residuals(&forest, &syn.data, &part.a1, None).unwrap();
    let v = sample_variance(&eta);
    assert!((0.7..=1.5).contains(&v), "residual variance {v}");
}

#[test]
fn model_two_ranks_its_feature_first_under_both_metrics() {
    let syn = gen_model(&ModelSpec {
        model_id: 2,
        n: 400,
        p: 10,
        correlated: false,
        seed: 8,
    })
    .unwrap();
    let rows: Vec<usize> = (0..400).collect();
    let rf = RfParams {
        n_trees: 50,
        ..RfParams::default()
    };
    for metric in [Metric::Bcfi, Metric::MinDepth] {
        let report = compute_importance(&syn.data, &rows, 5, &rf, metric, 1).unwrap();
        assert_eq!(report.order[0], 0, "{metric:?}");
    }
}

#[test]
fn selection_sequence_contract_and_determinism() {
    let syn = gen_model(&ModelSpec {
        model_id: 1,
        n: 650,
        p: 8,
        correlated: false,
        seed: 2,
    })
    .unwrap();
    let cfg = small_config(5);
    let a = run_pipeline(&syn.data, &cfg).unwrap();
    let b = run_pipeline(&syn.data, &cfg).unwrap();
    assert_eq!(a.importance, b.importance);
    assert_eq!(a.selection, b.selection);
    assert_eq!(a.partition, b.partition);

    let s = &a.selection;
    assert_eq!(s.tests.len(), s.k_hat);
    assert_eq!(s.selected, s.order[..s.k_hat].to_vec());
    let (last, earlier) = s.tests.split_last().unwrap();
    assert!(earlier.iter().all(|t| t.reject));
    assert!(s.exhausted || !last.reject);

    // forward_select on the same report reuses the seed's partition
    let again = forward_select(&syn.data, &a.importance, &cfg).unwrap();
    assert_eq!(again, a.selection);
}

#[test]
fn smaller_alpha_never_selects_more() {
    let syn = gen_model(&ModelSpec {
        model_id: 1,
        n: 650,
        p: 8,
        correlated: false,
        seed: 3,
    })
    .unwrap();
    for seed in 0..3 {
        let loose = run_pipeline(
            &syn.data,
            &SelectionConfig {
                alpha: 0.05,
                ..small_config(seed)
            },
        )
        .unwrap();
        let strict = run_pipeline(
            &syn.data,
            &SelectionConfig {
                alpha: 0.01,
                ..small_config(seed)
            },
        )
        .unwrap();
        assert!(strict.selection.k_hat <= loose.selection.k_hat);
        assert!(strict
            .selection
            .selected
            .iter()
            .all(|k| loose.selection.selected.contains(k)));
        for (s, l) in strict.selection.tests.iter().zip(&loose.selection.tests) {
            assert_eq!(s.statistic, l.statistic);
            assert!(s.threshold >= l.threshold);
        }
    }
}

#[test]
fn infeasible_sizes_are_rejected() {
    let syn = gen_model(&ModelSpec {
        model_id: 2,
        n: 649,
        p: 4,
        correlated: false,
        seed: 1,
    })
    .unwrap();
    let err = run_pipeline(&syn.data, &small_config(0)).unwrap_err();
    assert!(err.to_string().contains("m0 + 2*m1 + 2*m2"));
}
