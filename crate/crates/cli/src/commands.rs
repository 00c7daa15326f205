use std::path::Path;
use std::time::Instant;

use forestmmd::bcfi::{compute_importance, sample_subset};
use forestmmd::deep_mmd::KernelTrainConfig;
use forestmmd::fsd::{run_pipeline, SelectionConfig};
use forestmmd::rf::RfParams;
use forestmmd::seed::{derive_seed, rng_from_seed};
use forestmmd::synth::{gen_model, run_benchmark, ModelSpec};
use forestmmd::Dataset;

use crate::args::{BenchmarkArgs, GenArgs, ImportanceArgs, RankArgs, SelectArgs, TestArgs};
use crate::data::{read_dataset, write_dataset, write_text};
use crate::error::{CliError, CliResult};
use crate::report::{
    BenchmarkSection, ConfigEcho, DataEcho, ImportanceSection, RunReport, SelectionSection, Timings,
};

pub fn gen(args: &GenArgs) -> CliResult<()> {
    let spec = ModelSpec {
        model_id: args.model,
        n: args.n,
        p: args.p,
        correlated: args.correlated,
        seed: args.seed,
    };
    let synthetic = gen_model(&spec)?;
    write_dataset(&args.out, &synthetic.data)?;
    println!(
        "wrote {} rows x {} features to {}",
        args.n,
        args.p,
        args.out.display()
    );
    Ok(())
}

fn rf_params(trees: usize) -> RfParams {
    RfParams {
        n_trees: trees,
        ..RfParams::default()
    }
}

fn load(rank: &RankArgs) -> CliResult<(Dataset, DataEcho)> {
    let data = read_dataset(&rank.csv, &rank.target)?;
    let echo = DataEcho {
        path: rank.csv.display().to_string(),
        target: rank.target.clone(),
        n_rows: data.n_rows(),
        n_features: data.n_features(),
    };
    Ok((data, echo))
}

fn emit(report: &RunReport, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(path) => write_text(path, &report.to_json()),
        None => Ok(()),
    }
}

fn print_ranking(section: &ImportanceSection) {
    println!("{:>4}  {:<24} {:>14}", "rank", "feature", "score");
    for f in &section.ranking {
        println!("{:>4}  {:<24} {:>14.6}", f.rank, f.name, f.value);
    }
}

/// Importance ranking on `m0` rows drawn from the seed.
pub fn importance(args: &ImportanceArgs) -> CliResult<()> {
    let start = Instant::now();
    let rank = &args.rank;
    let (data, echo) = load(rank)?;
    if rank.m0 > data.n_rows() {
        return Err(CliError::Usage(format!(
            "m0 = {} exceeds the {} available rows",
            rank.m0,
            data.n_rows()
        )));
    }
    let rf = rf_params(rank.trees);
    let metric = rank.metric.into();
    let mut rng = rng_from_seed(derive_seed(rank.seed, 0));
    let subset = sample_subset(data.n_rows(), rank.m0, &mut rng)?;
    let result = compute_importance(
        &data,
        &subset,
        rank.repetitions,
        &rf,
        metric,
        derive_seed(rank.seed, 1),
    )?;

    let mut report = RunReport::new(ConfigEcho::Importance {
        data: echo,
        m0: rank.m0,
        repetitions: rank.repetitions,
        rf,
        metric,
        seed: rank.seed,
    });
    let section = ImportanceSection::new(&result, data.names());
    print_ranking(&section);
    report.importance = Some(section);
    if rank.with_timings {
        let total = start.elapsed().as_secs_f64();
        report.timings = Some(Timings {
            importance_seconds: Some(total),
            selection_seconds: None,
            total_seconds: total,
        });
    }
    emit(&report, rank.json_out.as_deref())
}

fn selection_config(
    rank_seed: u64,
    m: (usize, usize, usize),
    reps: usize,
    trees: usize,
    metric: forestmmd::bcfi::Metric,
    test: &TestArgs,
) -> SelectionConfig {
    let defaults = SelectionConfig::default();
    SelectionConfig {
        m0: m.0,
        m1: m.1,
        m2: m.2,
        alpha: test.alpha,
        reps,
        rf: rf_params(trees),
        kernel_train: KernelTrainConfig {
            epochs: test.epochs,
            ..KernelTrainConfig::default()
        },
        n_perm: test.n_perm,
        metric,
        seed: rank_seed,
        krr_first: !test.rf_only,
        bonferroni: test.bonferroni,
        tuning: if test.no_tuning {
            None
        } else {
            defaults.tuning.clone()
        },
        ..defaults
    }
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let start = Instant::now();
    let rank = &args.rank;
    let (data, echo) = load(rank)?;
    let config = selection_config(
        rank.seed,
        (rank.m0, args.m1, args.m2),
        rank.repetitions,
        rank.trees,
        rank.metric.into(),
        &args.test,
    );
    config.check_feasible(data.n_rows())?;
    let outcome = run_pipeline(&data, &config)?;

    let mut report = RunReport::new(ConfigEcho::Select {
        data: echo,
        selection: config,
    });
    let importance = ImportanceSection::new(&outcome.importance, data.names());
    let selection = SelectionSection::new(&outcome.selection, data.names());
    print_ranking(&importance);
    println!();
    println!(
        "{:>3}  {:<24} {:>12} {:>12} {:>8}  decision",
        "K", "added", "statistic", "threshold", "p"
    );
    for s in &selection.steps {
        let threshold = s
            .threshold
            .map_or("inf".to_string(), |t| format!("{t:.4e}"));
        let decision = if s.reject { "reject" } else { "stop" };
        println!(
            "{:>3}  {:<24} {:>12.4e} {:>12} {:>8.3}  {decision}",
            s.k, s.feature, s.statistic, threshold, s.p_value
        );
    }
    if selection.exhausted {
        println!(
            "every step rejected; keeping all {} features",
            selection.selected.len()
        );
    }
    println!(
        "selected ({}): {}",
        selection.selected.len(),
        selection.selected.join(", ")
    );
    report.importance = Some(importance);
    report.selection = Some(selection);
    if rank.with_timings {
        report.timings = Some(Timings {
            importance_seconds: Some(outcome.importance_seconds),
            selection_seconds: Some(outcome.selection_seconds),
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
    emit(&report, rank.json_out.as_deref())
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let start = Instant::now();
    if args.reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    if args.models.is_empty() {
        return Err(CliError::Usage("no models given".into()));
    }
    let s = args.sizes;
    let config = selection_config(
        args.seed,
        (s, s, s),
        args.repetitions,
        args.trees,
        args.metric.into(),
        &args.test,
    );
    config.validate()?;
    let n = config.rows_needed();
    let specs: Vec<ModelSpec> = args
        .models
        .iter()
        .map(|&model_id| ModelSpec {
            model_id,
            n,
            p: args.p,
            correlated: args.correlated,
            seed: args.seed,
        })
        .collect();
    for spec in &specs {
        spec.validate()?;
    }
    let table = run_benchmark(&specs, &config, args.reps)?;

    if let Some(path) = &args.out {
        let mut csv = String::from("model_id,rep,hits,wrong,seconds\n");
        for r in &table.rows {
            csv += &format!(
                "{},{},{},{},{:.3}\n",
                r.model_id, r.rep, r.hits, r.wrong, r.seconds
            );
        }
        write_text(path, &csv)?;
    }
    println!(
        "{:>5} {:>5} {:>8} {:>8} {:>10}",
        "model", "reps", "mu_c", "n_w", "sec/rep"
    );
    for row in &table.summary {
        println!(
            "{:>5} {:>5} {:>8.3} {:>8.3} {:>10.1}",
            row.model_id, row.reps, row.mu_c, row.n_w, row.mean_seconds
        );
    }

    let mut report = RunReport::new(ConfigEcho::Benchmark {
        models: args.models.clone(),
        p: args.p,
        n,
        correlated: args.correlated,
        reps: args.reps,
        data_seed: args.seed,
        selection: config,
        note: format!(
            "desk-scale run: {} Monte Carlo repetitions per model (published tables use 200)",
            args.reps
        ),
    });
    report.benchmark = Some(BenchmarkSection::new(&table, args.with_timings));
    if args.with_timings {
        report.timings = Some(Timings {
            importance_seconds: None,
            selection_seconds: None,
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
    emit(&report, args.json_out.as_deref())
}
