use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::likelihood::negative_log_likelihood;
use crate::error::{Error, Result};

/// Closed intervals for each hyperparameter. `lo == hi` pins a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub signal_variance: (f64, f64),
    pub lengthscales: Vec<(f64, f64)>,
    pub noise_variance: (f64, f64),
}

impl HyperBounds {
    pub fn isotropic(dim: usize, signal_variance: (f64, f64), lengthscale: (f64, f64), noise_variance: (f64, f64)) -> Self {
        HyperBounds {
            signal_variance,
            lengthscales: vec![lengthscale; dim],
            noise_variance,
        }
    }

    /// Generic bounds for standardized data.
    pub fn default_for(dim: usize) -> Self {
        Self::isotropic(dim, (1e-3, 1e2), (1e-2, 1e2), (1e-6, 1e1))
    }

    fn intervals(&self) -> Vec<(f64, f64)> {
        let mut v = vec![self.signal_variance];
        v.extend(self.lengthscales.iter().copied());
        v.push(self.noise_variance);
        v
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::Dimension(format!(
                "{} lengthscale bounds for a {dim}-dimensional kernel",
                self.lengthscales.len()
            )));
        }
        for (i, (lo, hi)) in self.intervals().into_iter().enumerate() {
            let is_noise = i == dim + 1;
            let fixed = lo == hi;
            if !(lo <= hi) || !hi.is_finite() || (lo <= 0.0 && !(is_noise && fixed && lo == 0.0)) {
                return Err(Error::Input(format!("invalid hyperparameter bound [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn spec_from(values: &[f64]) -> KernelSpec {
    let d = values.len() - 2;
    KernelSpec {
        signal_variance: values[0],
        lengthscales: values[1..=d].to_vec(),
        noise_variance: values[d + 1],
    }
}

/// Multi-restart Nelder–Mead on the negative log marginal likelihood, in log
/// parameter space, projected onto the bounds.
///
/// The first restart starts from `init` clamped into the bounds; the others
/// start log-uniformly inside them. Returns the best spec seen, which is never
/// worse than the clamped start.
pub fn optimize_hyperparameters(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &KernelSpec,
    bounds: &HyperBounds,
    restarts: usize,
) -> Result<KernelSpec> {
    bounds.validate(init.dim())?;
    let intervals = bounds.intervals();
    let free: Vec<usize> = (0..intervals.len())
        .filter(|&i| intervals[i].0 < intervals[i].1)
        .collect();

    let mut base: Vec<f64> = vec![init.signal_variance];
    base.extend(init.lengthscales.iter().copied());
    base.push(init.noise_variance);
    for (v, (lo, hi)) in base.iter_mut().zip(&intervals) {
        *v = v.clamp(*lo, *hi);
    }

    let to_values = |theta: &[f64]| {
        let mut v = base.clone();
        for (k, &i) in free.iter().enumerate() {
            let (lo, hi) = intervals[i];
            v[i] = theta[k].clamp(lo.ln(), hi.ln()).exp();
        }
        v
    };
    let objective = |theta: &[f64]| -> f64 {
        match negative_log_likelihood(x, y, &spec_from(&to_values(theta))) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };

    let start: Vec<f64> = free.iter().map(|&i| base[i].ln()).collect();
    let mut best_theta = start.clone();
    let mut best = objective(&start);
    if free.is_empty() {
        return finish(best, &to_values(&best_theta));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x6a09_e667);
    let max_evals = 80 * (free.len() + 1);
    for r in 0..restarts.max(1) {
        let x0: Vec<f64> = if r == 0 {
            start.clone()
        } else {
            free.iter()
                .map(|&i| {
                    let (lo, hi) = intervals[i];
                    rng.random_range(lo.ln()..=hi.ln())
                })
                .collect()
        };
        let (theta, value) = nelder_mead(&objective, &x0, 0.5, max_evals, 1e-8);
        if value < best {
            best = value;
            best_theta = theta;
        }
    }
    finish(best, &to_values(&best_theta))
}

fn finish(best: f64, values: &[f64]) -> Result<KernelSpec> {
    if !best.is_finite() {
        return Err(Error::Numerical(
            "marginal likelihood could not be evaluated at any restart".into(),
        ));
    }
    Ok(spec_from(values))
}

/// Minimal Nelder–Mead simplex search. Returns the best vertex and value.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let mut evals = n + 1;

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        if hi.is_finite() && (hi - lo).abs() <= ftol * (1.0 + lo.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    for (v, b) in p.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    p.1 = f(&p.0);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
