//! Datasets: the hidden test oracle for simulated screens, plus CSV ingestion
//! of real screening databases.

mod csv_io;
mod schema;

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use csv_io::{load_dataset, write_dataset};
pub use schema::{SchemaConfig, Subsample, Transform};

/// Candidate features together with both ground-truth score vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Arc<DMatrix<f64>>,
    pub cheap_scores: Vec<f64>,
    pub expensive_scores: Vec<f64>,
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        cheap_scores: Vec<f64>,
        expensive_scores: Vec<f64>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.nrows();
        let ids = ids.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        if cheap_scores.len() != n || expensive_scores.len() != n || ids.len() != n {
            return Err(Error::Dimension(format!(
                "{n} feature rows, {} cheap scores, {} expensive scores, {} ids",
                cheap_scores.len(),
                expensive_scores.len(),
                ids.len()
            )));
        }
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let ds = Dataset {
            features: Arc::new(features),
            cheap_scores,
            expensive_scores,
            ids,
            feature_names,
        };
        ds.check_finite()?;
        Ok(ds)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} columns",
                names.len(),
                self.dim()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.len() {
            let row_ok = self.features.row(i).iter().all(|v| v.is_finite())
                && self.cheap_scores[i].is_finite()
                && self.expensive_scores[i].is_finite();
            if !row_ok {
                return Err(Error::Data {
                    row: self.ids[i].clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cheap_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let d = self.dim();
        let features = DMatrix::from_fn(idx.len(), d, |r, c| self.features[(idx[r], c)]);
        Dataset {
            features: Arc::new(features),
            cheap_scores: idx.iter().map(|&i| self.cheap_scores[i]).collect(),
            expensive_scores: idx.iter().map(|&i| self.expensive_scores[i]).collect(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Features with the cheap score appended as an extra column.
    pub fn rich_features(&self) -> DMatrix<f64> {
        let (n, d) = (self.len(), self.dim());
        DMatrix::from_fn(n, d + 1, |r, c| {
            if c < d {
                self.features[(r, c)]
            } else {
                self.cheap_scores[r]
            }
        })
    }
}

/// Indices of the `n_top` largest expensive scores; ties go to the lower index.
pub fn true_top_n(dataset: &Dataset, n_top: usize) -> Result<BTreeSet<usize>> {
    if n_top > dataset.len() {
        return Err(Error::Input(format!(
            "top-{n_top} requested from {} candidates",
            dataset.len()
        )));
    }
    Ok(top_indices(&dataset.expensive_scores, n_top).into_iter().collect())
}

/// Indices of the `k` largest values, ordered best first, ties by index.
pub(crate) fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}
