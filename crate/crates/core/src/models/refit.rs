use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CovariateModel, MultiFidelityModel, ScoreModel};
use crate::engine::ScreenState;
use crate::error::Result;
use crate::gp::{optimize_hyperparameters, HyperBounds, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitSettings {
    pub restarts: usize,
    /// Bounds for `f`; derived from the data when absent.
    #[serde(default)]
    pub f_bounds: Option<HyperBounds>,
    /// Bounds for `g`; derived from the data when absent.
    #[serde(default)]
    pub g_bounds: Option<HyperBounds>,
}

impl Default for RefitSettings {
    fn default() -> Self {
        RefitSettings { restarts: 5, f_bounds: None, g_bounds: None }
    }
}

/// Bounds scaled to the spread of the inputs and targets.
pub(crate) fn data_bounds(x: &DMatrix<f64>, y: &DVector<f64>) -> HyperBounds {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-12);
    let lengthscales = x
        .column_iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = if hi > lo { hi - lo } else { 1.0 };
            (1e-2 * range, 1e2 * range)
        })
        .collect();
    HyperBounds {
        signal_variance: (1e-2 * var, 1e2 * var),
        lengthscales,
        noise_variance: (1e-6 * var, 2.0 * var),
    }
}

/// Fits `init` to `(x, y)` with the noise term standing for the whole
/// observation noise. Returns the latent spec and the fitted noise sd.
pub(crate) fn fit_gp(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &KernelSpec,
    sigma: f64,
    bounds: Option<&HyperBounds>,
    restarts: usize,
) -> Result<(KernelSpec, f64)> {
    let start = KernelSpec {
        lengthscales: init
            .lengthscales
            .iter()
            .map(|l| if l.is_finite() { *l } else { f64::MAX })
            .collect(),
        noise_variance: init.noise_variance + sigma * sigma,
        ..init.clone()
    };
    let bounds = bounds.cloned().unwrap_or_else(|| data_bounds(x, y));
    let fitted = optimize_hyperparameters(x, y, &start, &bounds, restarts)?;
    let sigma = fitted.noise_variance.sqrt().max(1e-9);
    Ok((KernelSpec { noise_variance: 0.0, ..fitted }, sigma))
}

fn rows(x: &DMatrix<f64>, ids: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(ids.len(), x.ncols(), |r, c| x[(ids[r], c)])
}

impl ScoreModel {
    /// Refits hyperparameters to the data revealed in `state` by minimising
    /// each GP's negative log marginal likelihood.
    ///
    /// `f` is fitted to the cheap scores; under the covariate model `g` is
    /// fitted to the fully tested candidates. A GP with fewer than two
    /// observations keeps its current spec.
    pub fn refit(&self, state: &ScreenState, settings: &RefitSettings) -> Result<ScoreModel> {
        let x = state.features();
        let cheap_ids: Vec<usize> = state.revealed_cheap().keys().copied().collect();
        let cheap_y = DVector::from_iterator(cheap_ids.len(), state.revealed_cheap().values().copied());
        let fit_f = |spec: &KernelSpec, sigma: f64| -> Result<(KernelSpec, f64)> {
            if cheap_ids.len() < 2 {
                log::debug!("refit: {} cheap scores, keeping f", cheap_ids.len());
                return Ok((spec.clone(), sigma));
            }
            fit_gp(&rows(x, &cheap_ids), &cheap_y, spec, sigma, settings.f_bounds.as_ref(), settings.restarts)
        };
        match self {
            ScoreModel::MultiFidelity(m) => {
                let (f_spec, sigma_cheap) = fit_f(&m.f_spec, m.sigma_cheap)?;
                Ok(ScoreModel::MultiFidelity(MultiFidelityModel {
                    f_spec,
                    sigma_cheap,
                    sigma_expensive: m.sigma_expensive,
                }))
            }
            ScoreModel::Covariate(m) => {
                let (f_spec, sigma_cheap) = fit_f(&m.f_spec, m.sigma_cheap)?;
                let tt: Vec<usize> = state.revealed_expensive().keys().copied().collect();
                let (g_spec, sigma_expensive) = if tt.len() < 2 {
                    log::debug!("refit: {} expensive scores, keeping g", tt.len());
                    (m.g_spec.clone(), m.sigma_expensive)
                } else {
                    let d = x.ncols();
                    let z = DMatrix::from_fn(tt.len(), d + 1, |r, c| {
                        if c < d {
                            x[(tt[r], c)]
                        } else {
                            state.revealed_cheap()[&tt[r]]
                        }
                    });
                    let y = DVector::from_iterator(tt.len(), state.revealed_expensive().values().copied());
                    fit_gp(&z, &y, &m.g_spec, m.sigma_expensive, settings.g_bounds.as_ref(), settings.restarts)?
                };
                Ok(ScoreModel::Covariate(CovariateModel { f_spec, g_spec, sigma_cheap, sigma_expensive }))
            }
        }
    }
}

/// Keeps a model and refits it only when new scores have been revealed.
#[derive(Debug, Clone)]
pub struct RefitCache {
    model: ScoreModel,
    seen: (usize, usize),
}

impl RefitCache {
    pub fn new(model: ScoreModel) -> Self {
        RefitCache { model, seen: (0, 0) }
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }

    /// Number of revealed scores since the last refit.
    pub fn pending(&self, state: &ScreenState) -> usize {
        let now = (state.revealed_cheap().len(), state.revealed_expensive().len());
        (now.0 + now.1).saturating_sub(self.seen.0 + self.seen.1)
    }

    /// Refits if anything new was revealed. Returns whether a refit happened.
    pub fn update(&mut self, state: &ScreenState, settings: &RefitSettings) -> Result<bool> {
        let now = (state.revealed_cheap().len(), state.revealed_expensive().len());
        if now == self.seen {
            return Ok(false);
        }
        self.model = self.model.refit(state, settings)?;
        self.seen = now;
        Ok(true)
    }
}
