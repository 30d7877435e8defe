use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CovariateModel, MultiFidelityModel, ScoreModel};
use crate::engine::{ScreenState, TestStatus};
use crate::error::{Error, Result};
use crate::gp::{GpPosterior, KernelSpec};
use crate::par;
use crate::stats::{gaussian_ei, gaussian_exceedance, Gaussian};

/// Posterior law of one candidate's expensive score.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpensiveMarginal {
    /// Already observed.
    Pinned(f64),
    Gaussian(Gaussian),
    /// Equal-weight Gaussian mixture, one component per Monte-Carlo draw of
    /// the unknown cheap score.
    Mixture(Vec<Gaussian>),
}

impl ExpensiveMarginal {
    pub fn mean(&self) -> f64 {
        match self {
            ExpensiveMarginal::Pinned(v) => *v,
            ExpensiveMarginal::Gaussian(g) => g.mean,
            ExpensiveMarginal::Mixture(cs) => cs.iter().map(|c| c.mean).sum::<f64>() / cs.len() as f64,
        }
    }

    /// `E[max(Y − y_max, 0)]`.
    pub fn expected_improvement(&self, y_max: f64) -> f64 {
        match self {
            ExpensiveMarginal::Pinned(v) => (v - y_max).max(0.0),
            ExpensiveMarginal::Gaussian(g) => gaussian_ei(g.mean, g.sd(), y_max),
            ExpensiveMarginal::Mixture(cs) => {
                cs.iter().map(|c| gaussian_ei(c.mean, c.sd(), y_max)).sum::<f64>() / cs.len() as f64
            }
        }
    }

    /// `P[Y ≥ τ]`.
    pub fn exceedance(&self, tau: f64) -> f64 {
        match self {
            ExpensiveMarginal::Pinned(v) => f64::from(*v >= tau),
            ExpensiveMarginal::Gaussian(g) => gaussian_exceedance(g.mean, g.sd(), tau),
            ExpensiveMarginal::Mixture(cs) => {
                cs.iter().map(|c| gaussian_exceedance(c.mean, c.sd(), tau)).sum::<f64>() / cs.len() as f64
            }
        }
    }
}

/// `m` joint draws of expensive scores over `candidate_ids`.
///
/// Columns of already expensive-tested candidates hold their observed score in
/// every row and are flagged in `pinned`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub candidate_ids: Vec<usize>,
    pub draws: DMatrix<f64>,
    pub pinned: Vec<bool>,
}

impl SampleSet {
    pub fn draws_count(&self) -> usize {
        self.draws.nrows()
    }

    pub fn len(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidate_ids.is_empty()
    }

    pub fn column_of(&self, id: usize) -> Option<usize> {
        self.candidate_ids.iter().position(|&c| c == id)
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    MultiFidelity {
        f: GpPosterior,
        cheap_noise: f64,
        expensive_noise: f64,
    },
    Covariate {
        f: GpPosterior,
        g: GpPosterior,
        cheap_noise: f64,
        expensive_noise: f64,
    },
}

/// A score model conditioned on one screen state.
///
/// Holds its own snapshot of what was revealed so it can be extended with
/// hypothetical cheap results without touching the real state.
#[derive(Debug, Clone)]
pub struct ModelPosterior {
    features: Arc<DMatrix<f64>>,
    status: Vec<TestStatus>,
    cheap: Vec<Option<f64>>,
    expensive: Vec<Option<f64>>,
    fitted: Fitted,
}

fn rows(x: &DMatrix<f64>, ids: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(ids.len(), x.ncols(), |r, c| x[(ids[r], c)])
}

fn augmented(x: &DMatrix<f64>, ids: &[usize], ycheap: &[f64]) -> DMatrix<f64> {
    let d = x.ncols();
    DMatrix::from_fn(ids.len(), d + 1, |r, c| if c < d { x[(ids[r], c)] } else { ycheap[r] })
}

impl ModelPosterior {
    pub(super) fn new(model: &ScoreModel, state: &ScreenState) -> Result<Self> {
        model.validate()?;
        let features = state.features().clone();
        if features.ncols() != model.feature_dim() {
            return Err(Error::Dimension(format!(
                "model expects {} features, pool has {}",
                model.feature_dim(),
                features.ncols()
            )));
        }
        let n = state.len();
        let mut cheap = vec![None; n];
        let mut expensive = vec![None; n];
        for (&i, &v) in state.revealed_cheap() {
            cheap[i] = Some(v);
        }
        for (&i, &v) in state.revealed_expensive() {
            expensive[i] = Some(v);
        }
        let fitted = match model {
            ScoreModel::MultiFidelity(m) => fit_multi_fidelity(m, &features, state)?,
            ScoreModel::Covariate(m) => fit_covariate(m, &features, state)?,
        };
        Ok(ModelPosterior {
            features,
            status: state.statuses().to_vec(),
            cheap,
            expensive,
            fitted,
        })
    }

    pub fn status(&self, i: usize) -> TestStatus {
        self.status[i]
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    fn f(&self) -> &GpPosterior {
        match &self.fitted {
            Fitted::MultiFidelity { f, .. } | Fitted::Covariate { f, .. } => f,
        }
    }

    fn cheap_noise(&self) -> f64 {
        match &self.fitted {
            Fitted::MultiFidelity { cheap_noise, .. } | Fitted::Covariate { cheap_noise, .. } => *cheap_noise,
        }
    }

    fn require(&self, ids: &[usize], allowed: &[TestStatus], what: &str) -> Result<()> {
        for &i in ids {
            match self.status.get(i) {
                Some(s) if allowed.contains(s) => {}
                Some(s) => {
                    return Err(Error::Precondition(format!("{what}: candidate {i} has status {s:?}")));
                }
                None => return Err(Error::Input(format!("{what}: candidate {i} out of range"))),
            }
        }
        Ok(())
    }

    /// Gaussian marginals of the cheap score for untested candidates.
    pub fn cheap_marginals(&self, ids: &[usize]) -> Result<Vec<Gaussian>> {
        self.require(ids, &[TestStatus::Uu], "cheap prediction")?;
        let (mean, var) = self.f().mean_var(&rows(&self.features, ids))?;
        let noise = self.cheap_noise();
        Ok((0..ids.len()).map(|k| Gaussian::new(mean[k], var[k] + noise)).collect())
    }

    /// Same posterior with one more (possibly hypothetical) cheap result.
    pub fn with_cheap(&self, id: usize, value: f64) -> Result<ModelPosterior> {
        self.require(&[id], &[TestStatus::Uu], "cheap reveal")?;
        let x = RowDVector::from_iterator(self.features.ncols(), self.features.row(id).iter().copied());
        let mut next = self.clone();
        match &mut next.fitted {
            Fitted::MultiFidelity { f, cheap_noise, .. } | Fitted::Covariate { f, cheap_noise, .. } => {
                *f = f.with_observation(&x, value, *cheap_noise)?;
            }
        }
        next.status[id] = TestStatus::Tu;
        next.cheap[id] = Some(value);
        Ok(next)
    }

    /// Per-candidate expensive-score laws.
    ///
    /// `cheap_normals` are standard normal draws shared by every untested
    /// candidate under the covariate model (common random numbers); they set
    /// the number of mixture components. The multi-fidelity model ignores them.
    pub fn expensive_marginals(&self, ids: &[usize], cheap_normals: &[f64]) -> Result<Vec<ExpensiveMarginal>> {
        for &i in ids {
            if i >= self.len() {
                return Err(Error::Input(format!("candidate {i} out of range")));
            }
        }
        let mut out: Vec<Option<ExpensiveMarginal>> = ids
            .iter()
            .map(|&i| self.expensive[i].map(ExpensiveMarginal::Pinned))
            .collect();
        let open: Vec<usize> = (0..ids.len()).filter(|&k| out[k].is_none()).collect();
        if open.is_empty() {
            return Ok(out.into_iter().map(Option::unwrap).collect());
        }
        match &self.fitted {
            Fitted::MultiFidelity { f, expensive_noise, .. } => {
                let open_ids: Vec<usize> = open.iter().map(|&k| ids[k]).collect();
                let (mean, var) = f.mean_var(&rows(&self.features, &open_ids))?;
                for (j, &k) in open.iter().enumerate() {
                    out[k] = Some(ExpensiveMarginal::Gaussian(Gaussian::new(mean[j], var[j] + expensive_noise)));
                }
            }
            Fitted::Covariate { f, g, cheap_noise, expensive_noise } => {
                let tu: Vec<usize> = open.iter().copied().filter(|&k| self.status[ids[k]] == TestStatus::Tu).collect();
                let uu: Vec<usize> = open.iter().copied().filter(|&k| self.status[ids[k]] == TestStatus::Uu).collect();
                if !tu.is_empty() {
                    let tu_ids: Vec<usize> = tu.iter().map(|&k| ids[k]).collect();
                    let yc: Vec<f64> = tu_ids.iter().map(|&i| self.cheap[i].unwrap()).collect();
                    let (mean, var) = g.mean_var(&augmented(&self.features, &tu_ids, &yc))?;
                    for (j, &k) in tu.iter().enumerate() {
                        out[k] = Some(ExpensiveMarginal::Gaussian(Gaussian::new(mean[j], var[j] + expensive_noise)));
                    }
                }
                if !uu.is_empty() {
                    if cheap_normals.is_empty() {
                        return Err(Error::Input("mixture marginals need at least one cheap-score draw".into()));
                    }
                    let uu_ids: Vec<usize> = uu.iter().map(|&k| ids[k]).collect();
                    let (mean, var) = f.mean_var(&rows(&self.features, &uu_ids))?;
                    let evaluator = AugmentedEvaluator::new(g, *expensive_noise);
                    let mixtures = par::map_indexed(uu_ids.len(), |j| {
                        let sd = (var[j] + cheap_noise).sqrt();
                        let ycs: Vec<f64> = cheap_normals.iter().map(|z| mean[j] + sd * z).collect();
                        evaluator.at_cheap_values(self.features.row(uu_ids[j]).iter().copied(), &ycs)
                    });
                    for (k, mix) in uu.into_iter().zip(mixtures) {
                        out[k] = Some(ExpensiveMarginal::Mixture(mix));
                    }
                }
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }

    /// Posterior mean of the expensive score (no Monte Carlo for tested
    /// candidates; `cheap_normals` as for [`expensive_marginals`](Self::expensive_marginals)).
    pub fn expensive_means(&self, ids: &[usize], cheap_normals: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .expensive_marginals(ids, cheap_normals)?
            .iter()
            .map(ExpensiveMarginal::mean)
            .collect())
    }

    /// `m` joint draws of the expensive scores over `ids`.
    pub fn sample_expensive<R: Rng + ?Sized>(&self, ids: &[usize], m: usize, rng: &mut R) -> Result<SampleSet> {
        for &i in ids {
            if i >= self.len() {
                return Err(Error::Input(format!("candidate {i} out of range")));
            }
        }
        let k = ids.len();
        let pinned: Vec<bool> = ids.iter().map(|&i| self.expensive[i].is_some()).collect();
        let mut draws = DMatrix::zeros(m, k);
        for (c, &i) in ids.iter().enumerate() {
            if let Some(v) = self.expensive[i] {
                draws.column_mut(c).fill(v);
            }
        }
        let set = |draws| SampleSet { candidate_ids: ids.to_vec(), draws, pinned: pinned.clone() };
        if m == 0 {
            return Ok(set(draws));
        }
        let open: Vec<usize> = (0..k).filter(|&c| !pinned[c]).collect();
        if open.is_empty() {
            return Ok(set(draws));
        }

        match &self.fitted {
            Fitted::MultiFidelity { f, expensive_noise, .. } => {
                let open_ids: Vec<usize> = open.iter().map(|&c| ids[c]).collect();
                let s = f.sample_with_noise(&rows(&self.features, &open_ids), m, *expensive_noise, rng)?;
                for (j, &c) in open.iter().enumerate() {
                    draws.set_column(c, &s.column(j));
                }
            }
            Fitted::Covariate { f, g, cheap_noise, expensive_noise } => {
                let tu: Vec<usize> = open.iter().copied().filter(|&c| self.status[ids[c]] == TestStatus::Tu).collect();
                let uu: Vec<usize> = open.iter().copied().filter(|&c| self.status[ids[c]] == TestStatus::Uu).collect();
                let tu_ids: Vec<usize> = tu.iter().map(|&c| ids[c]).collect();
                let uu_ids: Vec<usize> = uu.iter().map(|&c| ids[c]).collect();
                let tu_cheap: Vec<f64> = tu_ids.iter().map(|&i| self.cheap[i].unwrap()).collect();
                let cols: Vec<usize> = tu.iter().chain(&uu).copied().collect();

                if uu.is_empty() {
                    let s = g.sample_with_noise(&augmented(&self.features, &tu_ids, &tu_cheap), m, *expensive_noise, rng)?;
                    for (j, &c) in cols.iter().enumerate() {
                        draws.set_column(c, &s.column(j));
                    }
                } else {
                    // Cheap scores of the untested candidates, drawn jointly.
                    let yc = f.sample_with_noise(&rows(&self.features, &uu_ids), m, *cheap_noise, rng)?;
                    let seeds: Vec<u64> = (0..m).map(|_| rng.next_u64()).collect();
                    let all_ids: Vec<usize> = tu_ids.iter().chain(&uu_ids).copied().collect();
                    let per_draw = par::map_indexed(m, |r| -> Result<Vec<f64>> {
                        let mut cheap_vals = tu_cheap.clone();
                        cheap_vals.extend(yc.row(r).iter().copied());
                        let z = augmented(&self.features, &all_ids, &cheap_vals);
                        let mut draw_rng = ChaCha8Rng::seed_from_u64(seeds[r]);
                        let s = g.sample_with_noise(&z, 1, *expensive_noise, &mut draw_rng)?;
                        Ok(s.row(0).iter().copied().collect())
                    });
                    for (r, row) in per_draw.into_iter().enumerate() {
                        for (j, v) in row?.into_iter().enumerate() {
                            draws[(r, cols[j])] = v;
                        }
                    }
                }
            }
        }
        Ok(set(draws))
    }
}

fn fit_multi_fidelity(m: &MultiFidelityModel, x: &DMatrix<f64>, state: &ScreenState) -> Result<Fitted> {
    let nugget = m.f_spec.noise_variance;
    let cheap_noise = m.sigma_cheap.powi(2) + nugget;
    let expensive_noise = m.sigma_expensive.powi(2) + nugget;
    let mut ids = Vec::new();
    let mut ys = Vec::new();
    let mut noise = Vec::new();
    for (&i, &y) in state.revealed_cheap() {
        ids.push(i);
        ys.push(y);
        noise.push(cheap_noise);
    }
    for (&i, &y) in state.revealed_expensive() {
        ids.push(i);
        ys.push(y);
        noise.push(expensive_noise);
    }
    let f = GpPosterior::fit_with_noise(
        &rows(x, &ids),
        &DVector::from_vec(ys),
        &latent(&m.f_spec),
        &DVector::from_vec(noise),
    )?;
    Ok(Fitted::MultiFidelity { f, cheap_noise, expensive_noise })
}

fn fit_covariate(m: &CovariateModel, x: &DMatrix<f64>, state: &ScreenState) -> Result<Fitted> {
    let cheap_noise = m.sigma_cheap.powi(2) + m.f_spec.noise_variance;
    let expensive_noise = m.sigma_expensive.powi(2) + m.g_spec.noise_variance;
    let cheap_ids: Vec<usize> = state.revealed_cheap().keys().copied().collect();
    let cheap_y: Vec<f64> = state.revealed_cheap().values().copied().collect();
    let f = GpPosterior::fit_with_noise(
        &rows(x, &cheap_ids),
        &DVector::from_vec(cheap_y),
        &latent(&m.f_spec),
        &DVector::from_element(cheap_ids.len(), cheap_noise),
    )?;
    let tt: Vec<usize> = state.revealed_expensive().keys().copied().collect();
    let tt_cheap: Vec<f64> = tt.iter().map(|i| state.revealed_cheap()[i]).collect();
    let tt_y: Vec<f64> = state.revealed_expensive().values().copied().collect();
    let g = GpPosterior::fit_with_noise(
        &augmented(x, &tt, &tt_cheap),
        &DVector::from_vec(tt_y),
        &latent(&m.g_spec),
        &DVector::from_element(tt.len(), expensive_noise),
    )?;
    Ok(Fitted::Covariate { f, g, cheap_noise, expensive_noise })
}

/// Spec with the noise stripped; noise is supplied per observation instead.
fn latent(spec: &KernelSpec) -> KernelSpec {
    KernelSpec { noise_variance: 0.0, ..spec.clone() }
}

/// Evaluates the `g` posterior at `(x, y_cheap)` for many `y_cheap` values of
/// one candidate, reusing the feature part of the kernel.
pub(crate) struct AugmentedEvaluator<'a> {
    g: &'a GpPosterior,
    noise: f64,
}

impl<'a> AugmentedEvaluator<'a> {
    pub(crate) fn new(g: &'a GpPosterior, noise: f64) -> Self {
        AugmentedEvaluator { g, noise }
    }

    pub(crate) fn at_cheap_values(&self, x: impl Iterator<Item = f64>, ycs: &[f64]) -> Vec<Gaussian> {
        let g = self.g;
        let spec = g.spec();
        let n = g.len();
        if n == 0 {
            return ycs.iter().map(|_| Gaussian::new(0.0, spec.signal_variance + self.noise)).collect();
        }
        let d = spec.dim() - 1;
        let x: Vec<f64> = x.collect();
        let inputs = g.train_inputs();
        let ls_y = spec.lengthscales[d];
        let feature_part: Vec<f64> = (0..n)
            .map(|i| spec.eval(inputs.row(i).iter().take(d).copied(), x.iter().copied()))
            .collect();
        let l = g.chol_factor();
        let alpha = g.alpha();
        let mut ks = vec![0.0; n];
        let mut v = vec![0.0; n];
        ycs.iter()
            .map(|&yc| {
                for i in 0..n {
                    let r = (inputs[(i, d)] - yc) / ls_y;
                    ks[i] = feature_part[i] * (-0.5 * r * r).exp();
                }
                let mean: f64 = ks.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
                // forward substitution L v = ks
                let mut q = 0.0;
                for i in 0..n {
                    let mut s = ks[i];
                    for j in 0..i {
                        s -= l[(i, j)] * v[j];
                    }
                    v[i] = s / l[(i, i)];
                    q += v[i] * v[i];
                }
                Gaussian::new(mean, (spec.signal_variance - q).max(0.0) + self.noise)
            })
            .collect()
    }
}

