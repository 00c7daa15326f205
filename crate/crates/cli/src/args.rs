use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use forestmmd::bcfi::Metric;

#[derive(Debug, Parser)]
#[command(
    name = "forestmmd",
    version,
    about = "Random-forest importance ranking and MMD-tested forward feature selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Rank features by importance.
    Importance(ImportanceArgs),
    /// Rank features, then select them by sequential residual tests.
    Select(SelectArgs),
    /// Repeat generation and selection on synthetic models and score the results.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Bcfi,
    #[value(alias = "min_depth")]
    MinDepth,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Bcfi => Metric::Bcfi,
            MetricArg::MinDepth => Metric::MinDepth,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Model number, 1 to 6.
    #[arg(long)]
    pub model: u32,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    /// Mix each feature with its predecessor (0.7 / 0.3).
    #[arg(long)]
    pub correlated: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Forest and ranking flags shared by `importance` and `select`.
#[derive(Debug, Args)]
pub struct RankArgs {
    /// Input CSV with a header row.
    pub csv: PathBuf,
    #[arg(long, default_value = "target")]
    pub target: String,
    /// Rows used for the importance ranking.
    #[arg(long, default_value_t = 400)]
    pub m0: usize,
    /// Importance repetitions.
    #[arg(long = "R", visible_alias = "repetitions", default_value_t = 100)]
    pub repetitions: usize,
    /// Trees per forest.
    #[arg(long = "B", visible_alias = "trees", default_value_t = 100)]
    pub trees: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Bcfi)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Include wall-clock timings in the JSON report.
    #[arg(long)]
    pub with_timings: bool,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub rank: RankArgs,
}

/// Selection flags shared by `select` and `benchmark`.
#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub n_perm: usize,
    /// Test each step at alpha / p.
    #[arg(long)]
    pub bonferroni: bool,
    /// Use a forest for the one-feature reduced model instead of kernel ridge regression.
    #[arg(long)]
    pub rf_only: bool,
    /// Fit the selection forests with the given settings instead of tuning them by cross-validation.
    #[arg(long)]
    pub no_tuning: bool,
    /// Kernel training epochs.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub rank: RankArgs,
    /// Rows per residual sample.
    #[arg(long, default_value_t = 400)]
    pub m1: usize,
    /// Rows per model training set.
    #[arg(long, default_value_t = 400)]
    pub m2: usize,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated model numbers.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    pub models: Vec<u32>,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    /// Common value of m0, m1 and m2; each dataset has 5 * sizes rows.
    #[arg(long, default_value_t = 400)]
    pub sizes: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long)]
    pub correlated: bool,
    #[arg(long = "R", visible_alias = "repetitions", default_value_t = 100)]
    pub repetitions: usize,
    #[arg(long = "B", visible_alias = "trees", default_value_t = 100)]
    pub trees: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Bcfi)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-repetition CSV rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report with rows and summary.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    #[arg(long)]
    pub with_timings: bool,
    #[command(flatten)]
    pub test: TestArgs,
}
