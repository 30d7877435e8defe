use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::KernelSpec;
use crate::models::{RefitSettings, ScoreModel};

/// Budget, costs and mining target of one screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub budget: f64,
    pub c_cheap: f64,
    pub c_expensive: f64,
    pub n_top: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    ExpectedImprovement,
    Threshold,
    Mining,
    Thompson,
}

impl AcquisitionKind {
    pub fn is_greedy(self) -> bool {
        !matches!(self, AcquisitionKind::Thompson)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerKind {
    Greedy,
    /// Cheap test with probability `p1`; `None` uses the cost-balanced default.
    Random { p1: Option<f64> },
}

/// Knobs shared by every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySettings {
    /// Uniformly random cheap tests before acquisition-driven selection
    /// (random expensive tests for single-test policies).
    pub init_random: usize,
    /// Refit hyperparameters after this many new scores; `None` never refits.
    pub refit_every: Option<usize>,
    pub refit: RefitSettings,
    /// Re-estimate the threshold after this many new expensive scores.
    pub tau_refresh_every: usize,
    /// Cheap-score draws per untested candidate in Monte-Carlo marginals.
    pub acquisition_samples: usize,
    /// Joint draws behind each threshold estimate.
    pub threshold_samples: usize,
    /// Joint draws behind each mining-probability evaluation.
    pub mining_samples: usize,
    /// Outer draws of the hypothetical cheap score in the greedy controller.
    pub controller_samples: usize,
    /// Per-step cap on candidates scored by the acquisition.
    pub pool_cap: usize,
    /// Cap on untested candidates entering joint posterior draws.
    pub joint_pool_cap: usize,
}

impl Default for PolicySettings {
    fn default() -> Self {
        PolicySettings {
            init_random: 5,
            refit_every: Some(10),
            refit: RefitSettings::default(),
            tau_refresh_every: 10,
            acquisition_samples: 512,
            threshold_samples: 4096,
            mining_samples: 512,
            controller_samples: 64,
            pool_cap: 5000,
            joint_pool_cap: 1000,
        }
    }
}

impl PolicySettings {
    /// Default number of initial random tests for `workers` workers.
    pub fn default_init(workers: usize) -> usize {
        5.max(2 * workers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.acquisition_samples == 0 || self.threshold_samples == 0 || self.mining_samples == 0 || self.controller_samples == 0 {
            return Err(Error::Config("Monte-Carlo sample counts must be positive".into()));
        }
        if self.pool_cap == 0 || self.joint_pool_cap == 0 || self.tau_refresh_every == 0 {
            return Err(Error::Config("pool caps and refresh interval must be positive".into()));
        }
        if self.refit_every == Some(0) {
            return Err(Error::Config("refit_every must be positive".into()));
        }
        Ok(())
    }
}

/// A two-test sequential policy: acquisition + controller + model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub acquisition: AcquisitionKind,
    pub controller: ControllerKind,
    pub model: ScoreModel,
    pub settings: PolicySettings,
    pub seed: u64,
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.settings.validate()?;
        if self.controller == ControllerKind::Greedy && !self.acquisition.is_greedy() {
            return Err(Error::Config("the greedy controller needs a greedy acquisition".into()));
        }
        if let ControllerKind::Random { p1: Some(p) } = self.controller {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p1 must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Which features a single-test baseline may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Features only; the cheap test is never run.
    Poor,
    /// Features plus every cheap score, all bought up front.
    Rich,
}

/// Classical single-test Bayesian optimization on the expensive score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTestPolicy {
    pub acquisition: AcquisitionKind,
    pub mode: FeatureMode,
    /// GP over the visible features (`d` inputs for poor, `d + 1` for rich).
    pub spec: KernelSpec,
    pub sigma_expensive: f64,
    pub settings: PolicySettings,
    pub seed: u64,
}

impl SingleTestPolicy {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        self.spec.validate()?;
        self.settings.validate()?;
        let want = match self.mode {
            FeatureMode::Poor => feature_dim,
            FeatureMode::Rich => feature_dim + 1,
        };
        if self.spec.dim() != want {
            return Err(Error::Config(format!(
                "{:?} single-test GP needs {want} lengthscales, got {}",
                self.mode,
                self.spec.dim()
            )));
        }
        if self.acquisition == AcquisitionKind::Mining {
            return Err(Error::Config("single-test baselines support EI, threshold and Thompson".into()));
        }
        if !(self.sigma_expensive > 0.0) {
            return Err(Error::Config("sigma_expensive must be positive".into()));
        }
        Ok(())
    }
}
