use std::collections::BTreeSet;

use super::trace::Trace;
use crate::data::{true_top_n, Dataset};
use crate::error::Result;

/// Improvement of the running maximum. The first expensive score has nothing
/// to improve on and earns 0.
pub fn reward_optimization(revealed: f64, y_max_before: Option<f64>) -> f64 {
    match y_max_before {
        Some(m) => (revealed - m).max(0.0),
        None => 0.0,
    }
}

/// 1 when the tested candidate is one of the true top-N.
pub fn reward_mining(candidate: usize, truth_top: &BTreeSet<usize>) -> u32 {
    u32::from(truth_top.contains(&candidate))
}

/// Gap between the best expensive score in the pool and the best one found.
/// With nothing found the gap is the full range of expensive scores.
pub fn optimization_regret(trace: &Trace, oracle: &Dataset) -> f64 {
    let best = oracle.expensive_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = oracle.expensive_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let found = trace
        .expensive_candidates()
        .map(|i| oracle.expensive_scores[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if found == f64::NEG_INFINITY {
        best - worst
    } else {
        best - found
    }
}

/// Number of true top-N candidates never expensive-tested.
pub fn mining_regret(trace: &Trace, oracle: &Dataset, n_top: usize) -> Result<usize> {
    let top = true_top_n(oracle, n_top)?;
    let found: BTreeSet<usize> = trace.expensive_candidates().filter(|i| top.contains(i)).collect();
    Ok(n_top - found.len())
}
