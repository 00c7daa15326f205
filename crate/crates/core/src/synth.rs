//! Synthetic regression models for benchmarking feature selection.
//!
//! | model | features             | response                        |
//! |-------|----------------------|---------------------------------|
//! | 1     | U(1, 10)             | 0.3 x1 + 0.3 x2 + e             |
//! | 2     | U(1, 10)             | 3 sin(x1) + e                   |
//! | 3     | U(1, 10)             | 5 sin(x1 / 10) sqrt(x2) + e     |
//! | 4     | 14.5 Beta(2, 4) + 1  | 0.3 x1 + 0.3 x2 + e             |
//! | 5     | 14.5 Beta(2, 4) + 1  | 3 sin(x1) + e                   |
//! | 6     | 14.5 Beta(2, 4) + 1  | 5 sin(x1 / 10) sqrt(x2) + e     |
//!
//! with `e ~ N(0, 1)`. The correlated variant keeps `x1` and replaces
//! `x_k` by `0.7 x_k + 0.3 x_{k-1}` computed from the independent draws.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{default_names, Dataset};
use crate::error::{Error, Result};
use crate::fsd::{evaluate_selection, run_pipeline, SelectionConfig};
use crate::seed::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureLaw {
    Uniform,
    ScaledBeta,
}

impl FeatureLaw {
    pub fn support(self) -> (f64, f64) {
        match self {
            FeatureLaw::Uniform => (1.0, 10.0),
            FeatureLaw::ScaledBeta => (1.0, 15.5),
        }
    }

    pub fn variance(self) -> f64 {
        match self {
            FeatureLaw::Uniform => 81.0 / 12.0,
            // Beta(2, 4) has variance ab / ((a + b)^2 (a + b + 1)) = 8 / 252.
            FeatureLaw::ScaledBeta => 14.5 * 14.5 * 8.0 / 252.0,
        }
    }
}

enum Sampler {
    Uniform(Uniform<f64>),
    Beta(Beta<f64>),
}

impl Sampler {
    fn new(law: FeatureLaw) -> Self {
        match law {
            FeatureLaw::Uniform => {
                Sampler::Uniform(Uniform::new_inclusive(1.0, 10.0).expect("valid range"))
            }
            FeatureLaw::ScaledBeta => Sampler::Beta(Beta::new(2.0, 4.0).expect("valid shape")),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Beta(b) => 14.5 * b.sample(rng) + 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: u32,
    pub n: usize,
    pub p: usize,
    pub correlated: bool,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model_id: u32, n: usize, p: usize, seed: u64) -> Self {
        Self {
            model_id,
            n,
            p,
            correlated: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k0 = true_features(self.model_id)?.len();
        if self.p < k0 {
            return Err(Error::InvalidParameter(format!(
                "model {} needs p >= {k0}, got {}",
                self.model_id, self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn feature_law(model_id: u32) -> Result<FeatureLaw> {
    match model_id {
        1..=3 => Ok(FeatureLaw::Uniform),
        4..=6 => Ok(FeatureLaw::ScaledBeta),
        other => Err(Error::UnknownModel(other)),
    }
}

/// Zero-based indices of the features the model's response depends on.
pub fn true_features(model_id: u32) -> Result<Vec<usize>> {
    match model_id {
        2 | 5 => Ok(vec![0]),
        1 | 3 | 4 | 6 => Ok(vec![0, 1]),
        other => Err(Error::UnknownModel(other)),
    }
}

/// Noise-free regression function `f(x)`.
pub fn signal(model_id: u32, x: &[f64]) -> Result<f64> {
    match model_id {
        1 | 4 => Ok(0.3 * x[0] + 0.3 * x[1]),
        2 | 5 => Ok(3.0 * x[0].sin()),
        3 | 6 => Ok(5.0 * (x[0] / 10.0).sin() * x[1].sqrt()),
        other => Err(Error::UnknownModel(other)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub data: Dataset,
    pub true_features: Vec<usize>,
}

pub fn gen_model(spec: &ModelSpec) -> Result<Synthetic> {
    gen_model_with_noise(spec, 1.0)
}

/// Generates a model with noise `noise_sd * N(0, 1)`. Features and noise
/// come from separate streams, so the features do not depend on `noise_sd`.
pub fn gen_model_with_noise(spec: &ModelSpec, noise_sd: f64) -> Result<Synthetic> {
    spec.validate()?;
    let features = gen_features(
        feature_law(spec.model_id)?,
        spec.n,
        spec.p,
        spec.correlated,
        spec.seed,
    );
    let mut noise_rng = stream_rng(spec.seed, 1);
    let response = features
        .chunks_exact(spec.p)
        .map(|row| {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            Ok(signal(spec.model_id, row)? + noise_sd * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Synthetic {
        data: Dataset::new(features, default_names(spec.p), response)?,
        true_features: true_features(spec.model_id)?,
    })
}

/// Row-major `n x p` feature draws.
pub fn gen_features(law: FeatureLaw, n: usize, p: usize, correlated: bool, seed: u64) -> Vec<f64> {
    let sampler = Sampler::new(law);
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(n * p);
    let mut raw = vec![0.0; p];
    for _ in 0..n {
        raw.iter_mut().for_each(|v| *v = sampler.draw(&mut rng));
        if correlated {
            out.push(raw[0]);
            out.extend((1..p).map(|k| 0.7 * raw[k] + 0.3 * raw[k - 1]));
        } else {
            out.extend_from_slice(&raw);
        }
    }
    out
}

/// Monte Carlo estimate of `sqrt(var f(X) / var e)` with `var e = 1`.
pub fn estimate_snr(spec: &ModelSpec, mc_size: usize) -> Result<f64> {
    spec.validate()?;
    let id = spec.model_id;
    snr_of(
        |x| signal(id, x).expect("validated model"),
        feature_law(id)?,
        spec.p.min(2),
        spec.correlated,
        mc_size,
        spec.seed,
    )
}

/// Sample standard deviation of `f` over `mc_size` feature draws.
pub fn snr_of<F: Fn(&[f64]) -> f64>(
    f: F,
    law: FeatureLaw,
    p: usize,
    correlated: bool,
    mc_size: usize,
    seed: u64,
) -> Result<f64> {
    if mc_size < 2 {
        return Err(Error::InvalidParameter("mc_size must be at least 2".into()));
    }
    let xs = gen_features(law, mc_size, p, correlated, seed);
    let values: Vec<f64> = xs.chunks_exact(p).map(&f).collect();
    let mean = values.iter().sum::<f64>() / mc_size as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mc_size - 1) as f64;
    Ok(var.sqrt())
}

/// One Monte Carlo repetition of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model_id: u32,
    pub rep: usize,
    pub hits: usize,
    pub wrong: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub model_id: u32,
    pub reps: usize,
    /// Fraction of useful features selected, averaged over repetitions.
    pub mu_c: f64,
    /// Mean number of useless features selected.
    pub n_w: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Vec<BenchmarkSummary>,
}

/// Runs importance ranking plus forward selection `reps` times per model.
///
/// The data seed for repetition `r` of model `id` is derived from
/// `(spec.seed, id, r)` and the selection seed from `(config.seed, id, r)`;
/// repetitions are independent and run in parallel.
pub fn run_benchmark(
    models: &[ModelSpec],
    config: &SelectionConfig,
    reps: usize,
) -> Result<BenchmarkTable> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    for spec in models {
        spec.validate()?;
    }
    let jobs: Vec<(ModelSpec, usize)> = models
        .iter()
        .flat_map(|s| (0..reps).map(move |r| (*s, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(spec, rep)| {
            let stream = derive_seed(spec.model_id as u64, rep as u64);
            let data_spec = ModelSpec {
                seed: derive_seed(spec.seed, stream),
                ..spec
            };
            let cfg = SelectionConfig {
                seed: derive_seed(config.seed, stream),
                ..config.clone()
            };
            let synthetic = gen_model(&data_spec)?;
            let start = Instant::now();
            let outcome = run_pipeline(&synthetic.data, &cfg)?;
            let seconds = start.elapsed().as_secs_f64();
            let score = evaluate_selection(&outcome.selection.selected, &synthetic.true_features)?;
            log::info!(
                "model {} rep {}: selected {:?} in {:.1}s",
                spec.model_id,
                rep,
                outcome.selection.selected,
                seconds
            );
            Ok(BenchmarkRow {
                model_id: spec.model_id,
                rep,
                hits: score.hits,
                wrong: score.wrong,
                seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = models
        .iter()
        .map(|spec| {
            let k0 = true_features(spec.model_id).expect("validated").len() as f64;
            let mine: Vec<&BenchmarkRow> = rows
                .iter()
                .filter(|r| r.model_id == spec.model_id)
                .collect();
            let l = mine.len() as f64;
            BenchmarkSummary {
                model_id: spec.model_id,
                reps: mine.len(),
                mu_c: mine.iter().map(|r| r.hits as f64).sum::<f64>() / (l * k0),
                n_w: mine.iter().map(|r| r.wrong as f64).sum::<f64>() / l,
                mean_seconds: mine.iter().map(|r| r.seconds).sum::<f64>() / l,
            }
        })
        .collect();
    Ok(BenchmarkTable { rows, summary })
}
