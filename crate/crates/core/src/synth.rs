//! Synthetic screening problems with a tunable cheap/expensive relationship.
//!
//! Features are scalars drawn uniformly on `[0, 1]`. The cheap score is a GP
//! draw over the features; the expensive score is a GP draw whose kernel mixes
//! feature distance (weight `sin²θ`) and cheap-score distance (weight `cos²θ`).
//! At `θ = 0` the expensive score depends on the features only through the
//! cheap score; at `θ = π/2` the cheap score carries no information.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::linalg::cholesky_jittered;
use crate::gp::{kernel_matrix, KernelSpec};
use crate::models::{CovariateModel, ScoreModel};

pub const CHEAP_SIGNAL_VARIANCE: f64 = 0.0625;
pub const EXPENSIVE_SIGNAL_VARIANCE: f64 = 1.0;
pub const LENGTHSCALE: f64 = 0.25;
pub const SIGMA_CHEAP: f64 = 0.25;
pub const SIGMA_EXPENSIVE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    pub theta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n() -> usize {
    500
}

impl SynthConfig {
    pub fn new(n: usize, theta: f64, seed: u64) -> Result<Self> {
        let c = SynthConfig { n, theta, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("synthetic pool needs n >= 2, got {}", self.n)));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, pi/2], got {}", self.theta)));
        }
        Ok(())
    }
}

/// `|sin θ|` and `|cos θ|` with the rounding residue at the interval ends
/// snapped to zero, so the end points switch a dimension off exactly.
fn mixing(theta: f64) -> (f64, f64) {
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v.abs() };
    (snap(theta.sin()), snap(theta.cos()))
}

/// Kernel of the cheap score over the features (noise included).
pub fn cheap_kernel() -> KernelSpec {
    KernelSpec {
        signal_variance: CHEAP_SIGNAL_VARIANCE,
        lengthscales: vec![LENGTHSCALE],
        noise_variance: SIGMA_CHEAP * SIGMA_CHEAP,
    }
}

/// Kernel of the expensive score over `(x, y_cheap)` (noise included).
/// A zero mixing weight becomes an infinite lengthscale.
pub fn expensive_kernel(theta: f64) -> KernelSpec {
    let (s, c) = mixing(theta);
    KernelSpec {
        signal_variance: EXPENSIVE_SIGNAL_VARIANCE,
        lengthscales: vec![LENGTHSCALE / s, LENGTHSCALE / c],
        noise_variance: SIGMA_EXPENSIVE * SIGMA_EXPENSIVE,
    }
}

/// The generating model, for agents given full knowledge of it.
pub fn covariate_model(theta: f64) -> ScoreModel {
    let noiseless = |k: KernelSpec| KernelSpec { noise_variance: 0.0, ..k };
    ScoreModel::Covariate(CovariateModel {
        f_spec: noiseless(cheap_kernel()),
        g_spec: noiseless(expensive_kernel(theta)),
        sigma_cheap: SIGMA_CHEAP,
        sigma_expensive: SIGMA_EXPENSIVE,
    })
}

fn draw_gaussian<R: Rng + ?Sized>(cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let (l, _) = cholesky_jittered(cov)?;
    let z = DVector::from_fn(cov.nrows(), |_, _| rng.sample(rand_distr::StandardNormal));
    Ok(l * z)
}

/// Covariance of the cheap scores at features `x` (one column).
pub fn cheap_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    kernel_matrix(x, x, &cheap_kernel(), true)
}

/// Covariance of the expensive scores at features `x` given cheap scores.
pub fn expensive_covariance(x: &DMatrix<f64>, cheap: &DVector<f64>, theta: f64) -> Result<DMatrix<f64>> {
    let z = DMatrix::from_fn(x.nrows(), 2, |r, c| if c == 0 { x[(r, 0)] } else { cheap[r] });
    kernel_matrix(&z, &z, &expensive_kernel(theta), true)
}

/// One draw of the cheap scores at fixed features.
pub fn sample_cheap_scores<R: Rng + ?Sized>(x: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    draw_gaussian(&cheap_covariance(x)?, rng)
}

/// Draws one problem; bit-identical for equal configs.
pub fn generate_problem(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x = DMatrix::from_fn(config.n, 1, |_, _| rng.random::<f64>());
    let cheap = sample_cheap_scores(&x, &mut rng)?;
    let expensive = draw_gaussian(&expensive_covariance(&x, &cheap, config.theta)?, &mut rng)?;
    Dataset::new(x, cheap.as_slice().to_vec(), expensive.as_slice().to_vec(), None)?.with_feature_names(vec!["x".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonals_are_exact() {
        let x = DMatrix::from_column_slice(3, 1, &[0.1, 0.5, 0.9]);
        let c = cheap_covariance(&x).unwrap();
        let e = expensive_covariance(&x, &DVector::from_vec(vec![0.0, 1.0, 2.0]), 0.3).unwrap();
        for i in 0..3 {
            assert_eq!(c[(i, i)], 0.125);
            assert_eq!(e[(i, i)], 1.0025);
        }
    }

    #[test]
    fn theta_end_points_switch_off_one_distance() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 0.7]);
        let e0 = expensive_covariance(&x, &DVector::from_vec(vec![0.4, 0.4]), 0.0).unwrap();
        assert_eq!(e0[(0, 1)], 1.0);
        let e90 = expensive_covariance(&x, &DVector::from_vec(vec![-3.0, 3.0]), FRAC_PI_2).unwrap();
        let want = (-(0.7f64 * 0.7) / (2.0 * 0.0625)).exp();
        assert!((e90[(0, 1)] - want).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_problem() {
        let c = SynthConfig::new(30, 0.5, 9).unwrap();
        let a = generate_problem(&c).unwrap();
        let b = generate_problem(&c).unwrap();
        assert_eq!(a.cheap_scores, b.cheap_scores);
        assert_eq!(a.expensive_scores, b.expensive_scores);
        assert_eq!(*a.features, *b.features);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SynthConfig::new(1, 0.0, 0).is_err());
        assert!(SynthConfig::new(10, 2.0, 0).is_err());
    }
}
