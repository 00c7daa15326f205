use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample of `n` feature vectors with `p` named columns and a response.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    names: Vec<String>,
    response: Vec<f64>,
    n: usize,
    p: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, names: Vec<String>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        let p = names.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if p == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if features.len() != n * p {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                n,
                p
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite response at row {i}"
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate column name `{name}`"
                )));
            }
        }
        Ok(Self {
            features,
            names,
            response,
            n,
            p,
        })
    }

    /// Builds a dataset from row vectors; columns are named `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        if rows.len() != response.len() {
            return Err(Error::LengthMismatch(rows.len(), response.len()));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(features, default_names(p), response)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.features[i * self.p + k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, k)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        check_indices(rows, self.n)?;
        let mut features = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        let response = rows.iter().map(|&i| self.response[i]).collect();
        Dataset::new(features, self.names.clone(), response)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&k) = cols.iter().find(|&&k| k >= self.p) {
            return Err(Error::InvalidParameter(format!(
                "column {k} out of range for {} features",
                self.p
            )));
        }
        let mut features = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            features.extend(cols.iter().map(|&k| row[k]));
        }
        let names = cols.iter().map(|&k| self.names[k].clone()).collect();
        Dataset::new(features, names, self.response.clone())
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}

pub(crate) fn check_indices(rows: &[usize], n: usize) -> Result<()> {
    match rows.iter().find(|&&i| i >= n) {
        Some(&i) => Err(Error::InvalidParameter(format!(
            "row index {i} out of range for {n} rows"
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names_and_non_finite_values() {
        let err =
            Dataset::new(vec![1.0, 2.0], vec!["a".into(), "a".into()], vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
        let err = Dataset::new(vec![f64::NAN], vec!["a".into()], vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
        assert!(Dataset::new(vec![], vec!["a".into()], vec![]).is_err());
    }

    #[test]
    fn column_selection_keeps_order() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], vec![0.0, 1.0])
            .unwrap();
        let s = d.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert_eq!(s.names(), &["x3".to_string(), "x1".to_string()]);
        let r = d.select_rows(&[1, 1]).unwrap();
        assert_eq!(r.response(), &[1.0, 1.0]);
        assert!(d.select_rows(&[2]).is_err());
    }
}
