//! Replicated experiments, parameter sweeps and shipped presets.

mod config;
pub mod presets;
mod run;
mod sweep;

pub use config::{ExperimentConfig, Method, ModelKind, ProblemSource, ResolvedScreen};
pub use run::{run_experiment, trial_streams, ExperimentResult, Summary, TrialResult, METRICS};
pub use sweep::{sweep, SweepConfig, SweepPoint, SweepResult};
