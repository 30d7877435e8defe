use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Slack used when comparing remaining budget against a test cost.
pub const BUDGET_EPS: f64 = 1e-9;

/// What has been revealed about one candidate. The expensive-only state is
/// not representable: a candidate must pass the cheap test first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestStatus {
    /// Neither test applied.
    Uu,
    /// Cheap test applied, expensive pending.
    Tu,
    /// Both tests applied.
    Tt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Cheap,
    Expensive,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Cheap => "cheap",
            TestKind::Expensive => "expensive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub candidate: usize,
    pub test: TestKind,
}

impl Action {
    pub fn cheap(candidate: usize) -> Self {
        Action { candidate, test: TestKind::Cheap }
    }

    pub fn expensive(candidate: usize) -> Self {
        Action { candidate, test: TestKind::Expensive }
    }
}

/// State of one screen: who has been tested with what, what was seen, and how
/// much budget is left.
///
/// The remaining budget is derived from the test counts on every read, so the
/// accounting identity holds exactly instead of drifting through repeated
/// subtraction.
#[derive(Debug, Clone)]
pub struct ScreenState {
    features: Arc<DMatrix<f64>>,
    status: Vec<TestStatus>,
    revealed_cheap: BTreeMap<usize, f64>,
    revealed_expensive: BTreeMap<usize, f64>,
    budget: f64,
    c_cheap: f64,
    c_expensive: f64,
    charged_cheap: usize,
    upfront_cost: f64,
    y_max_expensive: Option<f64>,
}

impl ScreenState {
    pub fn new(features: Arc<DMatrix<f64>>, budget: f64, c_cheap: f64, c_expensive: f64) -> Result<Self> {
        if !(c_cheap > 0.0 && c_expensive > 0.0) || !(budget >= 0.0) {
            return Err(Error::Input(format!(
                "costs must be positive and budget non-negative (B={budget}, c_C={c_cheap}, c_E={c_expensive})"
            )));
        }
        let n = features.nrows();
        Ok(ScreenState {
            features,
            status: vec![TestStatus::Uu; n],
            revealed_cheap: BTreeMap::new(),
            revealed_expensive: BTreeMap::new(),
            budget,
            c_cheap,
            c_expensive,
            charged_cheap: 0,
            upfront_cost: 0.0,
            y_max_expensive: None,
        })
    }

    /// Reveals every cheap score up front, outside the budget. With `charge`
    /// the `n·c_C` it would cost is recorded as an up-front charge.
    pub fn prepay_cheap(&mut self, oracle: &Dataset, charge: bool) -> Result<()> {
        for i in 0..self.len() {
            if self.status[i] != TestStatus::Uu {
                return Err(Error::Precondition("prepay on a state that already has tests".into()));
            }
            self.status[i] = TestStatus::Tu;
            self.revealed_cheap.insert(i, oracle.cheap_scores[i]);
        }
        self.upfront_cost = if charge { self.len() as f64 * self.c_cheap } else { 0.0 };
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn features(&self) -> &Arc<DMatrix<f64>> {
        &self.features
    }

    pub fn status(&self, i: usize) -> TestStatus {
        self.status[i]
    }

    pub fn statuses(&self) -> &[TestStatus] {
        &self.status
    }

    pub fn ids_with(&self, status: TestStatus) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.status[i] == status).collect()
    }

    pub fn count(&self, status: TestStatus) -> usize {
        self.status.iter().filter(|s| **s == status).count()
    }

    pub fn revealed_cheap(&self) -> &BTreeMap<usize, f64> {
        &self.revealed_cheap
    }

    pub fn revealed_expensive(&self) -> &BTreeMap<usize, f64> {
        &self.revealed_expensive
    }

    pub fn initial_budget(&self) -> f64 {
        self.budget
    }

    pub fn c_cheap(&self) -> f64 {
        self.c_cheap
    }

    pub fn c_expensive(&self) -> f64 {
        self.c_expensive
    }

    pub fn cost(&self, test: TestKind) -> f64 {
        match test {
            TestKind::Cheap => self.c_cheap,
            TestKind::Expensive => self.c_expensive,
        }
    }

    /// Cheap tests paid for out of the budget.
    pub fn cheap_tests(&self) -> usize {
        self.charged_cheap
    }

    pub fn expensive_tests(&self) -> usize {
        self.revealed_expensive.len()
    }

    pub fn upfront_cost(&self) -> f64 {
        self.upfront_cost
    }

    pub fn spent(&self) -> f64 {
        self.c_cheap * self.charged_cheap as f64 + self.c_expensive * self.expensive_tests() as f64
    }

    pub fn budget_remaining(&self) -> f64 {
        self.budget - self.spent()
    }

    pub fn y_max_expensive(&self) -> Option<f64> {
        self.y_max_expensive
    }

    pub fn affordable(&self, test: TestKind, reserved: f64) -> bool {
        self.budget_remaining() - reserved + BUDGET_EPS >= self.cost(test)
    }

    /// Every legal action.
    pub fn available_actions(&self) -> Vec<Action> {
        self.available_actions_excluding(&|_| false, 0.0)
    }

    /// Legal actions with some candidates locked and some budget reserved,
    /// as seen by a worker while other tests are in flight.
    pub fn available_actions_excluding(&self, locked: &dyn Fn(usize) -> bool, reserved: f64) -> Vec<Action> {
        let cheap_ok = self.affordable(TestKind::Cheap, reserved);
        let exp_ok = self.affordable(TestKind::Expensive, reserved);
        let mut out = Vec::new();
        for (i, s) in self.status.iter().enumerate() {
            if locked(i) {
                continue;
            }
            match s {
                TestStatus::Uu if cheap_ok => out.push(Action::cheap(i)),
                TestStatus::Tu if exp_ok => out.push(Action::expensive(i)),
                _ => {}
            }
        }
        out
    }

    pub fn is_legal(&self, action: Action) -> bool {
        let status_ok = matches!(
            (action.test, self.status.get(action.candidate)),
            (TestKind::Cheap, Some(TestStatus::Uu)) | (TestKind::Expensive, Some(TestStatus::Tu))
        );
        status_ok && self.affordable(action.test, 0.0)
    }

    /// Applies `action`, revealing the oracle's stored score.
    pub fn apply(&mut self, action: Action, oracle: &Dataset) -> Result<f64> {
        if !self.is_legal(action) {
            return Err(Error::Precondition(format!(
                "{} test on candidate {} is not available (status {:?}, budget {})",
                action.test,
                action.candidate,
                self.status.get(action.candidate),
                self.budget_remaining()
            )));
        }
        let i = action.candidate;
        Ok(match action.test {
            TestKind::Cheap => {
                let y = oracle.cheap_scores[i];
                self.status[i] = TestStatus::Tu;
                self.revealed_cheap.insert(i, y);
                self.charged_cheap += 1;
                y
            }
            TestKind::Expensive => {
                let y = oracle.expensive_scores[i];
                self.status[i] = TestStatus::Tt;
                self.revealed_expensive.insert(i, y);
                self.y_max_expensive = Some(self.y_max_expensive.map_or(y, |m| m.max(y)));
                y
            }
        })
    }
}

/// Free-function form of [`ScreenState::available_actions`].
pub fn available_actions(state: &ScreenState) -> Vec<Action> {
    state.available_actions()
}

/// Applies `action` to a copy of `state`, returning the new state and the revealed score.
pub fn apply_action(state: &ScreenState, action: Action, oracle: &Dataset) -> Result<(ScreenState, f64)> {
    let mut next = state.clone();
    let y = next.apply(action, oracle)?;
    Ok((next, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(n: usize) -> Dataset {
        Dataset::new(
            DMatrix::from_fn(n, 1, |i, _| i as f64),
            (0..n).map(|i| i as f64 * 0.1).collect(),
            (0..n).map(|i| (i as f64 * 0.7).sin()).collect(),
            None,
        )
        .unwrap()
    }

    fn fresh(n: usize, b: f64) -> (Dataset, ScreenState) {
        let ds = oracle(n);
        let st = ScreenState::new(ds.features.clone(), b, 0.2, 1.0).unwrap();
        (ds, st)
    }

    #[test]
    fn fresh_state_offers_n_cheap_actions() {
        let (_, st) = fresh(6, 10.0);
        let acts = st.available_actions();
        assert_eq!(acts.len(), 6);
        assert!(acts.iter().all(|a| a.test == TestKind::Cheap));
    }

    #[test]
    fn tiny_budget_is_terminal() {
        let (_, st) = fresh(6, 0.1);
        assert!(st.available_actions().is_empty());
    }

    #[test]
    fn mixed_statuses_enumerate() {
        let (ds, mut st) = fresh(3, 50.0);
        st.apply(Action::cheap(0), &ds).unwrap();
        st.apply(Action::cheap(1), &ds).unwrap();
        st.apply(Action::expensive(1), &ds).unwrap();
        let acts = st.available_actions();
        assert_eq!(acts, vec![Action::expensive(0), Action::cheap(2)]);
    }

    #[test]
    fn budget_arithmetic() {
        let ds = oracle(10);
        let mut st = ScreenState::new(ds.features.clone(), 50.0, 0.2, 1.0).unwrap();
        for i in 0..5 {
            st.apply(Action::cheap(i), &ds).unwrap();
        }
        st.apply(Action::expensive(0), &ds).unwrap();
        st.apply(Action::expensive(3), &ds).unwrap();
        assert!((st.budget_remaining() - 47.0).abs() < 1e-12);
    }

    #[test]
    fn cheap_on_tu_is_rejected() {
        let (ds, mut st) = fresh(3, 5.0);
        st.apply(Action::cheap(0), &ds).unwrap();
        assert!(matches!(st.apply(Action::cheap(0), &ds), Err(Error::Precondition(_))));
        assert!(matches!(st.apply(Action::expensive(2), &ds), Err(Error::Precondition(_))));
    }

    #[test]
    fn expensive_updates_running_max() {
        let (ds, mut st) = fresh(5, 50.0);
        for i in 0..5 {
            st.apply(Action::cheap(i), &ds).unwrap();
        }
        st.apply(Action::expensive(2), &ds).unwrap();
        assert_eq!(st.status(2), TestStatus::Tt);
        assert_eq!(st.y_max_expensive(), Some(ds.expensive_scores[2]));
        st.apply(Action::expensive(4), &ds).unwrap();
        let m = ds.expensive_scores[2].max(ds.expensive_scores[4]);
        assert_eq!(st.y_max_expensive(), Some(m));
    }

    #[test]
    fn prepaid_cheap_is_outside_budget() {
        let (ds, mut st) = fresh(4, 3.0);
        st.prepay_cheap(&ds, true).unwrap();
        assert_eq!(st.budget_remaining(), 3.0);
        assert!((st.upfront_cost() - 0.8).abs() < 1e-15);
        assert_eq!(st.available_actions().len(), 4);
    }
}
