//! Generative models for (cheap, expensive) score pairs and posterior
//! inference over expensive scores given a partially tested pool.
//!
//! Two models are supported:
//!
//! * **multi-fidelity**: both scores are noisy views of one latent GP `f(x)`;
//!   the posterior over expensive scores stays Gaussian.
//! * **covariate**: the cheap score is `f(x) + noise`, the expensive score is
//!   `g(x, y_cheap) + noise` for a second GP `g` over the augmented input. The
//!   posterior for untested candidates is a non-Gaussian mixture and is handled
//!   by Monte Carlo over the unknown cheap score.

mod posterior;
pub(crate) mod refit;

use serde::{Deserialize, Serialize};

use crate::engine::ScreenState;
use crate::error::{Error, Result};
use crate::gp::KernelSpec;
use crate::stats::Gaussian;

pub use posterior::{ExpensiveMarginal, ModelPosterior, SampleSet};
pub use refit::{RefitCache, RefitSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFidelityModel {
    /// Latent `f` over candidate features. Its noise variance acts as a nugget
    /// shared by both observation types.
    pub f_spec: KernelSpec,
    pub sigma_cheap: f64,
    pub sigma_expensive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateModel {
    /// `f` over the `d` features.
    pub f_spec: KernelSpec,
    /// `g` over the `d` features plus the cheap score as a last input.
    pub g_spec: KernelSpec,
    pub sigma_cheap: f64,
    pub sigma_expensive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    MultiFidelity(MultiFidelityModel),
    Covariate(CovariateModel),
}

impl MultiFidelityModel {
    pub fn new(f_spec: KernelSpec, sigma_cheap: f64, sigma_expensive: f64) -> Result<Self> {
        let m = MultiFidelityModel { f_spec, sigma_cheap, sigma_expensive };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        self.f_spec.validate()?;
        check_sigmas(self.sigma_cheap, self.sigma_expensive)
    }
}

impl CovariateModel {
    pub fn new(f_spec: KernelSpec, g_spec: KernelSpec, sigma_cheap: f64, sigma_expensive: f64) -> Result<Self> {
        let m = CovariateModel { f_spec, g_spec, sigma_cheap, sigma_expensive };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        self.f_spec.validate()?;
        self.g_spec.validate()?;
        if self.g_spec.dim() != self.f_spec.dim() + 1 {
            return Err(Error::Input(format!(
                "g needs {} lengthscales (features plus cheap score), got {}",
                self.f_spec.dim() + 1,
                self.g_spec.dim()
            )));
        }
        check_sigmas(self.sigma_cheap, self.sigma_expensive)
    }
}

fn check_sigmas(c: f64, e: f64) -> Result<()> {
    if !(c > 0.0 && e > 0.0 && c.is_finite() && e.is_finite()) {
        return Err(Error::Input(format!("noise levels must be positive, got σ_C={c}, σ_E={e}")));
    }
    Ok(())
}

impl ScoreModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreModel::MultiFidelity(m) => m.validate(),
            ScoreModel::Covariate(m) => m.validate(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            ScoreModel::MultiFidelity(m) => m.f_spec.dim(),
            ScoreModel::Covariate(m) => m.f_spec.dim(),
        }
    }

    /// Conditions the model on everything revealed in `state`.
    pub fn condition(&self, state: &ScreenState) -> Result<ModelPosterior> {
        ModelPosterior::new(self, state)
    }
}

/// Gaussian marginals of the cheap score for untested candidates.
pub fn predict_cheap(model: &ScoreModel, state: &ScreenState, ids: &[usize]) -> Result<Vec<Gaussian>> {
    model.condition(state)?.cheap_marginals(ids)
}

/// Joint draws of expensive scores over `ids`; tested candidates are pinned.
pub fn posterior_expensive_samples<R: rand::Rng + ?Sized>(
    model: &ScoreModel,
    state: &ScreenState,
    ids: &[usize],
    m: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    model.condition(state)?.sample_expensive(ids, m, rng)
}
