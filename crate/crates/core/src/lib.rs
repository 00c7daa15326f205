//! Feature selection with shadow-debiased random-forest importance and
//! sequential deep-kernel MMD tests on model residuals.
//!
//! The pipeline has two stages:
//!
//! 1. [`bcfi`] ranks features by impurity importance minus the importance
//!    of a row-permuted shadow copy, averaged over repetitions.
//! 2. [`fsd`] walks the ranking and, for each prefix length `K`, compares
//!    the residuals of a full model with those of a model restricted to the
//!    first `K` features using a learned-kernel two-sample test
//!    ([`deep_mmd`]). The first prefix whose residuals are indistinguishable
//!    from the full model's is selected.
//!
//! [`synth`] generates the synthetic regression benchmarks used to score
//! the procedure.

pub mod bcfi;
pub mod dataset;
pub mod deep_mmd;
pub mod error;
pub mod fsd;
pub mod rf;
pub mod seed;
pub mod synth;

pub use dataset::Dataset;
pub use error::{Error, Result};
