//! CART regression trees and bootstrap random forests.
//!
//! Split quality is the weighted decrease in population variance,
//! `w*V - w_l*V_l - w_r*V_r`, where each weight is a node's share of the
//! tree's training rows. The same quantity, summed per feature and averaged
//! over trees, is the impurity importance consumed by [`crate::bcfi`].

mod forest;
mod tree;
mod tune;

pub use forest::{fit_forest, fit_forest_rows, Forest};
pub use tree::{fit_tree, Node, Split, Tree};
pub use tune::{tune_forest, RfTuning, TunedParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of candidate features drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// `max(1, ceil(p / 3))`
    Third,
    /// `ceil(fraction * p)`, clamped to `1..=p`
    Fraction(f64),
    /// A fixed count, clamped to `1..=p`
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            Mtry::Third => p.div_ceil(3),
            Mtry::Fraction(f) => (f * p as f64).ceil() as usize,
            Mtry::Fixed(m) => m,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    /// Nodes with fewer rows than this become leaves.
    pub min_node: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: Mtry::Third,
            min_node: 5,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if self.min_node < 2 {
            return Err(Error::InvalidParameter(
                "min_node must be at least 2".into(),
            ));
        }
        match self.mtry {
            Mtry::Fixed(0) => Err(Error::InvalidParameter("mtry must be at least 1".into())),
            Mtry::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidParameter(format!(
                "mtry fraction {f} outside (0, 1]"
            ))),
            _ => Ok(()),
        }
    }
}
