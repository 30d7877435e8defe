use std::collections::BTreeSet;

use super::agent::{Agent, DecisionView, SequentialAgent};
use super::policy::{FeatureMode, Policy, ScreenSpec, SingleTestPolicy};
use super::rewards::{reward_mining, reward_optimization};
use super::single::SingleTestAgent;
use super::state::{Action, ScreenState};
use super::trace::{Trace, TraceRecord};
use crate::data::{true_top_n, Dataset};
use crate::error::{Error, Result};

/// Tracks rewards against the hidden truth while a screen runs.
pub(crate) struct Recorder {
    truth: BTreeSet<usize>,
    pub(crate) trace: Trace,
}

impl Recorder {
    pub(crate) fn new(oracle: &Dataset, screen: &ScreenSpec, state: &ScreenState) -> Result<Self> {
        Ok(Recorder {
            truth: true_top_n(oracle, screen.n_top)?,
            trace: Trace {
                records: Vec::new(),
                n_top: screen.n_top,
                c_cheap: state.c_cheap(),
                c_expensive: state.c_expensive(),
                upfront_cheap_tests: if state.upfront_cost() > 0.0 { state.len() } else { 0 },
                upfront_cost: state.upfront_cost(),
            },
        })
    }

    /// Applies `action` and appends its record.
    pub(crate) fn apply(
        &mut self,
        state: &mut ScreenState,
        action: Action,
        oracle: &Dataset,
        worker_id: usize,
        times: Option<(f64, f64)>,
    ) -> Result<()> {
        let y_max_before = state.y_max_expensive();
        let y = state.apply(action, oracle)?;
        let (reward_opt, reward_mine) = match action.test {
            super::state::TestKind::Cheap => (0.0, 0),
            super::state::TestKind::Expensive => {
                (reward_optimization(y, y_max_before), reward_mining(action.candidate, &self.truth))
            }
        };
        self.trace.records.push(TraceRecord {
            step: self.trace.records.len(),
            worker_id,
            candidate_id: action.candidate,
            test: action.test,
            revealed_score: y,
            budget_after: state.budget_remaining(),
            reward_opt,
            reward_mine,
            dispatch_time: times.map(|t| t.0),
            finish_time: times.map(|t| t.1),
        });
        Ok(())
    }
}

fn check_pool(oracle: &Dataset, screen: &ScreenSpec) -> Result<()> {
    if screen.n_top == 0 || screen.n_top > oracle.len() {
        return Err(Error::Config(format!("n_top must be in 1..={}, got {}", oracle.len(), screen.n_top)));
    }
    Ok(())
}

/// Runs `agent` one test at a time until it has nothing left to do.
pub fn run_agent<A: Agent + ?Sized>(agent: &mut A, mut state: ScreenState, oracle: &Dataset, screen: &ScreenSpec) -> Result<Trace> {
    let mut rec = Recorder::new(oracle, screen, &state)?;
    let locked = BTreeSet::new();
    while let Some(action) = agent.decide(&DecisionView::idle(&state, &locked))? {
        rec.apply(&mut state, action, oracle, 0, None)?;
    }
    Ok(rec.trace)
}

/// Two-test sequential screen of `oracle` under `policy`.
pub fn run_sequential(oracle: &Dataset, screen: &ScreenSpec, policy: &Policy) -> Result<Trace> {
    check_pool(oracle, screen)?;
    let state = ScreenState::new(oracle.features.clone(), screen.budget, screen.c_cheap, screen.c_expensive)?;
    let mut agent = SequentialAgent::new(policy.clone(), screen.n_top)?;
    run_agent(&mut agent, state, oracle, screen)
}

/// Initial state of a single-test screen: every cheap score revealed, and
/// charged up front in rich mode.
pub(crate) fn single_test_state(oracle: &Dataset, screen: &ScreenSpec, mode: FeatureMode) -> Result<ScreenState> {
    let mut state = ScreenState::new(oracle.features.clone(), screen.budget, screen.c_cheap, screen.c_expensive)?;
    state.prepay_cheap(oracle, mode == FeatureMode::Rich)?;
    Ok(state)
}

/// Single-test screen: only expensive tests, chosen by one acquisition.
pub fn run_single_test(oracle: &Dataset, screen: &ScreenSpec, policy: &SingleTestPolicy) -> Result<Trace> {
    check_pool(oracle, screen)?;
    let state = single_test_state(oracle, screen, policy.mode)?;
    let mut agent = SingleTestAgent::new(policy.clone(), oracle.dim(), screen.n_top)?;
    run_agent(&mut agent, state, oracle, screen)
}
