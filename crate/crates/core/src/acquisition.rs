//! Two-test acquisition functions: expected improvement, top-N mining
//! probability, threshold exceedance and Thompson sampling, plus the
//! threshold estimate that makes the exceedance a cheap stand-in for mining.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ExpensiveMarginal, SampleSet};
use crate::stats::median;

/// Acquisition value per candidate, in candidate order of `ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionValues {
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
}

impl AcquisitionValues {
    pub fn new(ids: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(ids.len(), values.len());
        AcquisitionValues { ids, values }
    }

    pub fn get(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|k| self.values[k])
    }

    /// Best candidate; ties go to the lowest id.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.ids
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i, v))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Threshold used by the exceedance acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub tau: f64,
    pub n_top: usize,
    pub sample_count: usize,
    /// Expensive tests revealed since the estimate was made.
    pub age: usize,
}

/// Closed-form EI of `N(mean, sd²)` over `y_max`.
pub fn expected_improvement(mean: f64, sd: f64, y_max: f64) -> Result<f64> {
    if sd < 0.0 || sd.is_nan() {
        return Err(Error::Input(format!("standard deviation must be non-negative, got {sd}")));
    }
    Ok(crate::stats::gaussian_ei(mean, sd, y_max))
}

/// `P[Y ≥ τ]` for `N(mean, sd²)`.
pub fn exceedance(mean: f64, sd: f64, tau: f64) -> Result<f64> {
    if sd < 0.0 || sd.is_nan() {
        return Err(Error::Input(format!("standard deviation must be non-negative, got {sd}")));
    }
    Ok(crate::stats::gaussian_exceedance(mean, sd, tau))
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Input(format!("{what} must be finite, got {x}")));
    }
    Ok(())
}

/// Expected improvement from per-candidate marginals.
pub fn greedy_expected_improvement(ids: &[usize], marginals: &[ExpensiveMarginal], y_max: f64) -> Result<AcquisitionValues> {
    check_finite(y_max, "y_max")?;
    Ok(AcquisitionValues::new(
        ids.to_vec(),
        marginals.iter().map(|m| m.expected_improvement(y_max)).collect(),
    ))
}

/// Expected improvement as the mean positive part of each non-pinned column.
pub fn greedy_expected_improvement_samples(samples: &SampleSet, y_max: f64) -> Result<AcquisitionValues> {
    check_finite(y_max, "y_max")?;
    require_draws(samples)?;
    let m = samples.draws_count() as f64;
    Ok(per_open_column(samples, |col| {
        col.iter().map(|v| (v - y_max).max(0.0)).sum::<f64>() / m
    }))
}

/// `P[Y ≥ τ]` from per-candidate marginals.
pub fn greedy_threshold(ids: &[usize], marginals: &[ExpensiveMarginal], tau: f64) -> Result<AcquisitionValues> {
    if tau.is_nan() {
        return Err(Error::Input("threshold is NaN".into()));
    }
    Ok(AcquisitionValues::new(ids.to_vec(), marginals.iter().map(|m| m.exceedance(tau)).collect()))
}

/// Exceedance frequency of `τ` in each non-pinned column.
pub fn greedy_threshold_samples(samples: &SampleSet, tau: f64) -> Result<AcquisitionValues> {
    require_draws(samples)?;
    let m = samples.draws_count() as f64;
    Ok(per_open_column(samples, |col| col.iter().filter(|v| **v >= tau).count() as f64 / m))
}

/// Probability of each untested candidate being in the top `n_top` of the
/// whole sample set (pinned scores included in the ranking).
pub fn greedy_mining(samples: &SampleSet, n_top: usize) -> Result<AcquisitionValues> {
    check_rank(samples, n_top)?;
    require_draws(samples)?;
    let k = samples.len();
    let mut hits = vec![0usize; k];
    let mut order: Vec<usize> = (0..k).collect();
    for r in 0..samples.draws_count() {
        top_columns(samples, r, n_top, &mut order);
        for &c in &order[..n_top] {
            hits[c] += 1;
        }
    }
    let m = samples.draws_count() as f64;
    let (ids, values) = (0..k)
        .filter(|&c| !samples.pinned[c])
        .map(|c| (samples.candidate_ids[c], hits[c] as f64 / m))
        .unzip();
    Ok(AcquisitionValues::new(ids, values))
}

/// Median over draws of the `n_top`-th largest score.
pub fn estimate_threshold(samples: &SampleSet, n_top: usize) -> Result<ThresholdEstimate> {
    check_rank(samples, n_top)?;
    require_draws(samples)?;
    let k = samples.len();
    let mut order: Vec<usize> = (0..k).collect();
    let mut nth: Vec<f64> = (0..samples.draws_count())
        .map(|r| {
            top_columns(samples, r, n_top, &mut order);
            samples.draws[(r, order[n_top - 1])]
        })
        .collect();
    Ok(ThresholdEstimate {
        tau: median(&mut nth),
        n_top,
        sample_count: samples.draws_count(),
        age: 0,
    })
}

/// One posterior draw used directly as the acquisition (all columns).
pub fn thompson(samples: &SampleSet) -> Result<AcquisitionValues> {
    if samples.draws_count() != 1 {
        return Err(Error::Input(format!(
            "Thompson acquisition takes exactly one joint draw, got {}",
            samples.draws_count()
        )));
    }
    Ok(AcquisitionValues::new(
        samples.candidate_ids.clone(),
        samples.draws.row(0).iter().copied().collect(),
    ))
}

fn require_draws(samples: &SampleSet) -> Result<()> {
    if samples.draws_count() == 0 {
        return Err(Error::Input("sample set has no draws".into()));
    }
    Ok(())
}

fn check_rank(samples: &SampleSet, n_top: usize) -> Result<()> {
    if n_top == 0 || n_top > samples.len() {
        return Err(Error::Input(format!(
            "top-{n_top} is undefined over {} candidates",
            samples.len()
        )));
    }
    Ok(())
}

fn per_open_column(samples: &SampleSet, f: impl Fn(nalgebra::DVectorView<'_, f64>) -> f64) -> AcquisitionValues {
    let (ids, values) = (0..samples.len())
        .filter(|&c| !samples.pinned[c])
        .map(|c| {
            let col = samples.draws.column(c);
            (samples.candidate_ids[c], f(col.as_view()))
        })
        .unzip();
    AcquisitionValues::new(ids, values)
}

/// Reorders `order` so its first `n_top` entries are the best columns of draw
/// `r`, best first; equal scores rank the lower candidate id higher.
fn top_columns(samples: &SampleSet, r: usize, n_top: usize, order: &mut [usize]) {
    let row = samples.draws.row(r);
    let ids = &samples.candidate_ids;
    let cmp = |a: &usize, b: &usize| -> Ordering { row[*b].total_cmp(&row[*a]).then(ids[*a].cmp(&ids[*b])) };
    if n_top < order.len() {
        order.select_nth_unstable_by(n_top - 1, cmp);
    }
    order[..n_top].sort_unstable_by(cmp);
}
