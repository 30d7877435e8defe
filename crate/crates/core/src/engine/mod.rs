//! Screening state, policies, controllers and the loops that run them.

mod agent;
mod controller;
mod policy;
mod rewards;
mod run;
mod single;
mod state;
mod trace;

pub use agent::{Agent, DecisionView, SequentialAgent};
pub use controller::{
    forced_choice, greedy_comparison, greedy_controller_decide, random_controller_decide, str_probability,
    ControllerChoice, ControllerInputs, GreedyComparison,
};
pub use policy::{AcquisitionKind, ControllerKind, FeatureMode, Policy, PolicySettings, ScreenSpec, SingleTestPolicy};
pub use rewards::{mining_regret, optimization_regret, reward_mining, reward_optimization};
pub use run::{run_agent, run_sequential, run_single_test};
pub(crate) use run::{single_test_state, Recorder};
pub use single::SingleTestAgent;
pub use state::{apply_action, available_actions, Action, ScreenState, TestKind, TestStatus, BUDGET_EPS};
pub use trace::{Trace, TraceRecord};
