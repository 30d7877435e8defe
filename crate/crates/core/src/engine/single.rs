use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{cap_pool, scaled_rank, Agent, DecisionView};
use super::policy::{AcquisitionKind, FeatureMode, SingleTestPolicy};
use super::state::{Action, ScreenState, TestStatus};
use crate::acquisition::{estimate_threshold, thompson};
use crate::error::Result;
use crate::gp::{GpPosterior, KernelSpec};
use crate::models::SampleSet;
use crate::models::refit::fit_gp;
use crate::stats::{gaussian_ei, gaussian_exceedance};

/// Single-test Bayesian optimization over a state whose cheap scores were
/// all revealed before the screen (and are ignored in poor mode).
pub struct SingleTestAgent {
    policy: SingleTestPolicy,
    n_top: usize,
    spec: KernelSpec,
    sigma: f64,
    fitted_at: usize,
    tau: Option<(f64, usize)>,
    rng: ChaCha8Rng,
}

impl SingleTestAgent {
    pub fn new(policy: SingleTestPolicy, feature_dim: usize, n_top: usize) -> Result<Self> {
        policy.validate(feature_dim)?;
        Ok(SingleTestAgent {
            spec: KernelSpec { noise_variance: 0.0, ..policy.spec.clone() },
            sigma: policy.sigma_expensive,
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            fitted_at: 0,
            tau: None,
            n_top,
            policy,
        })
    }

    /// Model inputs of `ids`: features, plus the cheap score in rich mode.
    fn inputs(&self, state: &ScreenState, ids: &[usize]) -> DMatrix<f64> {
        let x = state.features();
        let d = x.ncols();
        match self.policy.mode {
            FeatureMode::Poor => DMatrix::from_fn(ids.len(), d, |r, c| x[(ids[r], c)]),
            FeatureMode::Rich => DMatrix::from_fn(ids.len(), d + 1, |r, c| {
                if c < d {
                    x[(ids[r], c)]
                } else {
                    state.revealed_cheap()[&ids[r]]
                }
            }),
        }
    }

    fn posterior(&mut self, state: &ScreenState) -> Result<GpPosterior> {
        let tt: Vec<usize> = state.revealed_expensive().keys().copied().collect();
        let x = self.inputs(state, &tt);
        let y = DVector::from_iterator(tt.len(), state.revealed_expensive().values().copied());
        if let Some(every) = self.policy.settings.refit_every {
            if tt.len() >= 2 && tt.len() >= self.fitted_at + every {
                let refit = &self.policy.settings.refit;
                let (spec, sigma) = fit_gp(&x, &y, &self.spec, self.sigma, refit.g_bounds.as_ref(), refit.restarts)?;
                self.spec = spec;
                self.sigma = sigma;
                self.fitted_at = tt.len();
                self.tau = None;
            }
        }
        let noise = self.sigma * self.sigma + self.policy.spec.noise_variance;
        GpPosterior::fit_with_noise(&x, &y, &self.spec, &DVector::from_element(tt.len(), noise))
    }

    fn noise(&self) -> f64 {
        self.sigma * self.sigma + self.policy.spec.noise_variance
    }

    fn threshold(&mut self, post: &GpPosterior, state: &ScreenState) -> Result<f64> {
        let now = state.expensive_tests();
        if let Some((tau, at)) = self.tau {
            if now - at < self.policy.settings.tau_refresh_every {
                return Ok(tau);
            }
        }
        let tested = state.ids_with(TestStatus::Tt);
        let untested = state.ids_with(TestStatus::Tu);
        let n_untested = untested.len();
        let pool = cap_pool(untested, self.policy.settings.joint_pool_cap, &mut self.rng);
        let rank = scaled_rank(self.n_top, tested.len(), pool.len(), n_untested);
        let m = self.policy.settings.threshold_samples;
        let s = post.sample_with_noise(&self.inputs(state, &pool), m, self.noise(), &mut self.rng)?;
        let mut draws = DMatrix::zeros(m, tested.len() + pool.len());
        for (c, &i) in tested.iter().enumerate() {
            draws.column_mut(c).fill(state.revealed_expensive()[&i]);
        }
        for j in 0..pool.len() {
            draws.set_column(tested.len() + j, &s.column(j));
        }
        let mut candidate_ids = tested.clone();
        candidate_ids.extend(&pool);
        let pinned = (0..candidate_ids.len()).map(|c| c < tested.len()).collect();
        let est = estimate_threshold(&SampleSet { candidate_ids, draws, pinned }, rank)?;
        self.tau = Some((est.tau, now));
        Ok(est.tau)
    }
}

impl Agent for SingleTestAgent {
    fn decide(&mut self, view: &DecisionView<'_>) -> Result<Option<Action>> {
        let state = view.state;
        let open = view.open(TestStatus::Tu);
        if open.is_empty() {
            return Ok(None);
        }
        let started = state.expensive_tests() + view.in_flight_expensive;
        if started < self.policy.settings.init_random {
            return Ok(Some(Action::expensive(open[self.rng.random_range(0..open.len())])));
        }
        let post = self.posterior(state)?;
        let pool = cap_pool(open, self.policy.settings.pool_cap, &mut self.rng);
        let xq = self.inputs(state, &pool);
        let values: Vec<f64> = match self.policy.acquisition {
            AcquisitionKind::Thompson => {
                let s = post.sample_with_noise(&xq, 1, self.noise(), &mut self.rng)?;
                let set = SampleSet { candidate_ids: pool.clone(), draws: s, pinned: vec![false; pool.len()] };
                let v = thompson(&set)?;
                pool.iter().map(|&i| v.get(i).unwrap()).collect()
            }
            kind => {
                let (mean, var) = post.mean_var(&xq)?;
                let noise = self.noise();
                let sd = |k: usize| (var[k] + noise).sqrt();
                match kind {
                    AcquisitionKind::ExpectedImprovement => match state.y_max_expensive() {
                        Some(y_max) => (0..pool.len()).map(|k| gaussian_ei(mean[k], sd(k), y_max)).collect(),
                        None => mean.iter().copied().collect(),
                    },
                    _ => {
                        let tau = self.threshold(&post, state)?;
                        (0..pool.len()).map(|k| gaussian_exceedance(mean[k], sd(k), tau)).collect()
                    }
                }
            }
        };
        let best = pool
            .iter()
            .zip(&values)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&i, _)| i)
            .unwrap();
        Ok(Some(Action::expensive(best)))
    }
}
