//! JSON run reports.
//!
//! Reports hold no wall-clock data unless timings are requested, so two
//! runs with the same flags serialize to the same bytes.

use forestmmd::bcfi::{ImportanceReport, Metric};
use forestmmd::deep_mmd::TestResult;
use forestmmd::fsd::{SelectionConfig, SelectionResult};
use forestmmd::rf::RfParams;
use forestmmd::synth::BenchmarkTable;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ConfigEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn new(config: ConfigEcho) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            importance: None,
            selection: None,
            benchmark: None,
            timings: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEcho {
    pub path: String,
    pub target: String,
    pub n_rows: usize,
    pub n_features: usize,
}

/// Every effective parameter of the run, seed included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ConfigEcho {
    Importance {
        data: DataEcho,
        m0: usize,
        repetitions: usize,
        rf: RfParams,
        metric: Metric,
        seed: u64,
    },
    Select {
        data: DataEcho,
        selection: SelectionConfig,
    },
    Benchmark {
        models: Vec<u32>,
        p: usize,
        n: usize,
        correlated: bool,
        reps: usize,
        data_seed: u64,
        selection: SelectionConfig,
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub name: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSection {
    pub metric: Metric,
    /// Best first.
    pub ranking: Vec<RankedFeature>,
}

impl ImportanceSection {
    pub fn new(report: &ImportanceReport, names: &[String]) -> Self {
        let ranking = report
            .order
            .iter()
            .enumerate()
            .map(|(rank, &k)| RankedFeature {
                rank: rank + 1,
                name: names[k].clone(),
                index: k,
                value: report.values[k],
            })
            .collect();
        Self {
            metric: report.metric,
            ranking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Feature added at this step.
    pub feature: String,
    pub statistic: f64,
    /// `None` when no permutation statistic can be exceeded at this level.
    pub threshold: Option<f64>,
    pub p_value: f64,
    pub reject: bool,
}

impl StepRecord {
    fn new(k: usize, feature: &str, t: &TestResult) -> Self {
        Self {
            k,
            feature: feature.to_string(),
            statistic: t.statistic,
            threshold: t.threshold.is_finite().then_some(t.threshold),
            p_value: t.p_value,
            reject: t.reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSection {
    pub steps: Vec<StepRecord>,
    pub k_hat: usize,
    pub selected: Vec<String>,
    pub exhausted: bool,
    pub full_rf: RfParams,
}

impl SelectionSection {
    pub fn new(result: &SelectionResult, names: &[String]) -> Self {
        let steps = result
            .tests
            .iter()
            .enumerate()
            .map(|(i, t)| StepRecord::new(i + 1, &names[result.order[i]], t))
            .collect();
        Self {
            steps,
            k_hat: result.k_hat,
            selected: result.selected.iter().map(|&k| names[k].clone()).collect(),
            exhausted: result.exhausted,
            full_rf: result.full_rf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub model_id: u32,
    pub rep: usize,
    pub hits: usize,
    pub wrong: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummaryRecord {
    pub model_id: u32,
    pub reps: usize,
    pub mu_c: f64,
    pub n_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSection {
    pub rows: Vec<BenchmarkRecord>,
    pub summary: Vec<BenchmarkSummaryRecord>,
}

impl BenchmarkSection {
    pub fn new(table: &BenchmarkTable, with_timings: bool) -> Self {
        let secs = |s: f64| with_timings.then_some(s);
        Self {
            rows: table
                .rows
                .iter()
                .map(|r| BenchmarkRecord {
                    model_id: r.model_id,
                    rep: r.rep,
                    hits: r.hits,
                    wrong: r.wrong,
                    seconds: secs(r.seconds),
                })
                .collect(),
            summary: table
                .summary
                .iter()
                .map(|s| BenchmarkSummaryRecord {
                    model_id: s.model_id,
                    reps: s.reps,
                    mu_c: s.mu_c,
                    n_w: s.n_w,
                    mean_seconds: secs(s.mean_seconds),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_seconds: Option<f64>,
    pub total_seconds: f64,
}
