use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

use super::kernel::{cross, kernel_matrix, KernelSpec};
use super::linalg::{cho_solve, cholesky_jittered, psd_factor, sample_mvn, solve_lower, solve_lower_vec};
use crate::error::{dim_err, Result};

/// A GP conditioned on training data. Immutable once built; share freely.
///
/// Observation noise is stored per training point so that models mixing
/// observation types (cheap and expensive views of one latent function) can
/// condition a single GP with heteroscedastic noise.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    train_inputs: DMatrix<f64>,
    train_targets: DVector<f64>,
    noise: DVector<f64>,
    spec: KernelSpec,
    chol_factor: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpPosterior {
    /// Conditions the GP on `(x, y)` with the spec's homoscedastic noise.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, spec: &KernelSpec) -> Result<Self> {
        let noise = DVector::from_element(x.nrows(), spec.noise_variance);
        Self::fit_with_noise(x, y, spec, &noise)
    }

    /// Conditions on `(x, y)` where observation `i` has noise variance `noise[i]`.
    pub fn fit_with_noise(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        spec: &KernelSpec,
        noise: &DVector<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        if x.nrows() != y.len() || noise.len() != y.len() {
            return dim_err(format!(
                "{} inputs, {} targets, {} noise terms",
                x.nrows(),
                y.len(),
                noise.len()
            ));
        }
        if x.nrows() > 0 && x.ncols() != spec.dim() {
            return dim_err(format!(
                "inputs have {} columns, kernel expects {}",
                x.ncols(),
                spec.dim()
            ));
        }
        let x = if x.nrows() == 0 {
            DMatrix::zeros(0, spec.dim())
        } else {
            x.clone()
        };
        let mut k = kernel_matrix(&x, &x, spec, false)?;
        for i in 0..k.nrows() {
            k[(i, i)] += noise[i];
        }
        let (chol_factor, _) = cholesky_jittered(&k)?;
        let alpha = cho_solve(&chol_factor, y);
        Ok(GpPosterior {
            train_inputs: x,
            train_targets: y.clone(),
            noise: noise.clone(),
            spec: spec.clone(),
            chol_factor,
            alpha,
        })
    }

    /// Prior (no data) for a `dim`-input GP.
    pub fn prior(spec: &KernelSpec) -> Result<Self> {
        Self::fit(&DMatrix::zeros(0, spec.dim()), &DVector::zeros(0), spec)
    }

    /// Adds one observation in O(n²) by extending the Cholesky factor.
    pub fn with_observation(&self, x: &RowDVector<f64>, y: f64, noise: f64) -> Result<Self> {
        if x.len() != self.spec.dim() {
            return dim_err(format!("point has {} coords, kernel expects {}", x.len(), self.spec.dim()));
        }
        let n = self.len();
        let xm = DMatrix::from_row_slice(1, x.len(), x.as_slice());
        let kx = cross(&self.train_inputs, &xm, &self.spec);
        let l = if n > 0 {
            solve_lower(&self.chol_factor, &kx)
        } else {
            DMatrix::zeros(0, 1)
        };
        let schur = self.spec.signal_variance + noise - l.norm_squared();

        let mut inputs = self.train_inputs.clone().insert_row(n, 0.0);
        inputs.set_row(n, x);
        let targets = self.train_targets.clone().insert_row(n, y);
        let noises = self.noise.clone().insert_row(n, noise);

        if schur <= 1e-12 * self.spec.signal_variance {
            return Self::fit_with_noise(&inputs, &targets, &self.spec, &noises);
        }
        let mut chol = self.chol_factor.clone().insert_row(n, 0.0).insert_column(n, 0.0);
        for j in 0..n {
            chol[(n, j)] = l[(j, 0)];
        }
        chol[(n, n)] = schur.sqrt();
        let alpha = cho_solve(&chol, &targets);
        Ok(GpPosterior {
            train_inputs: inputs,
            train_targets: targets,
            noise: noises,
            spec: self.spec.clone(),
            chol_factor: chol,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.train_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.train_inputs
    }

    pub fn train_targets(&self) -> &DVector<f64> {
        &self.train_targets
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol_factor
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn check_query(&self, xq: &DMatrix<f64>) -> Result<()> {
        if xq.ncols() != self.spec.dim() {
            return dim_err(format!(
                "query has {} columns, GP was trained on {}",
                xq.ncols(),
                self.spec.dim()
            ));
        }
        Ok(())
    }

    /// Latent mean and full covariance at the query points.
    pub fn mean_cov(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_query(xq)?;
        let kqq = kernel_matrix(xq, xq, &self.spec, false)?;
        if self.is_empty() {
            return Ok((DVector::zeros(xq.nrows()), kqq));
        }
        let ks = cross(&self.train_inputs, xq, &self.spec);
        let mean = ks.tr_mul(&self.alpha);
        let v = solve_lower(&self.chol_factor, &ks);
        let mut cov = kqq - v.tr_mul(&v);
        let k = cov.nrows();
        for i in 0..k {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
            if cov[(i, i)] < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        Ok((mean, cov))
    }

    /// Latent mean and marginal variance at the query points.
    pub fn mean_var(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_query(xq)?;
        let k = xq.nrows();
        if self.is_empty() {
            return Ok((DVector::zeros(k), DVector::from_element(k, self.spec.signal_variance)));
        }
        let ks = cross(&self.train_inputs, xq, &self.spec);
        let mean = ks.tr_mul(&self.alpha);
        let v = solve_lower(&self.chol_factor, &ks);
        let var = DVector::from_fn(k, |j, _| {
            (self.spec.signal_variance - v.column(j).norm_squared()).max(0.0)
        });
        Ok((mean, var))
    }

    /// Mean and variance at a single point given as an iterator of coordinates.
    ///
    /// Hot path for per-draw evaluations at sampled augmented inputs.
    pub fn point_mean_var(&self, point: &[f64]) -> (f64, f64) {
        debug_assert_eq!(point.len(), self.spec.dim());
        if self.is_empty() {
            return (0.0, self.spec.signal_variance);
        }
        let n = self.len();
        let ks = DVector::from_fn(n, |i, _| {
            self.spec
                .eval(self.train_inputs.row(i).iter().copied(), point.iter().copied())
        });
        let mean = ks.dot(&self.alpha);
        let v = solve_lower_vec(&self.chol_factor, &ks);
        (mean, (self.spec.signal_variance - v.norm_squared()).max(0.0))
    }

    /// `m` joint draws of the latent function at the query points, as rows.
    pub fn sample<R: Rng + ?Sized>(&self, xq: &DMatrix<f64>, m: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        self.sample_with_noise(xq, m, 0.0, rng)
    }

    /// Like [`sample`](Self::sample) but with `extra_variance` of independent
    /// noise added to each coordinate, i.e. draws of noisy observations.
    pub fn sample_with_noise<R: Rng + ?Sized>(
        &self,
        xq: &DMatrix<f64>,
        m: usize,
        extra_variance: f64,
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let (mean, mut cov) = self.mean_cov(xq)?;
        if m == 0 {
            return Ok(DMatrix::zeros(0, xq.nrows()));
        }
        for i in 0..cov.nrows() {
            cov[(i, i)] += extra_variance;
        }
        Ok(sample_mvn(&mean, &psd_factor(&cov), m, rng))
    }
}

/// Free-function form of [`GpPosterior::fit`].
pub fn fit_posterior(x: &DMatrix<f64>, y: &DVector<f64>, spec: &KernelSpec) -> Result<GpPosterior> {
    GpPosterior::fit(x, y, spec)
}

/// Free-function form of [`GpPosterior::mean_cov`].
pub fn posterior_mean_cov(post: &GpPosterior, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    post.mean_cov(xq)
}

/// Free-function form of [`GpPosterior::sample`].
pub fn sample_posterior<R: Rng + ?Sized>(
    post: &GpPosterior,
    xq: &DMatrix<f64>,
    m: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    post.sample(xq, m, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn empty_posterior_is_prior() {
        let spec = KernelSpec::isotropic(2.5, 0.3, 1, 0.1).unwrap();
        let post = GpPosterior::prior(&spec).unwrap();
        let (m, v) = post.mean_var(&col(&[0.0, 3.0])).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 0.0]);
        assert_eq!(v.as_slice(), &[2.5, 2.5]);
    }

    #[test]
    fn single_noisy_point_halves_the_target() {
        let spec = KernelSpec::isotropic(1.0, 1.0, 1, 1.0).unwrap();
        let post = GpPosterior::fit(&col(&[0.0]), &DVector::from_vec(vec![1.0]), &spec).unwrap();
        let (m, v) = post.mean_var(&col(&[0.0])).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-12);
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_interpolation() {
        let spec = KernelSpec::isotropic(1.0, 0.5, 1, 0.0).unwrap();
        let x = col(&[0.0, 0.4, 1.1]);
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let post = GpPosterior::fit(&x, &y, &spec).unwrap();
        let (m, cov) = post.mean_cov(&x).unwrap();
        assert!((m - &y).abs().max() < 1e-8);
        assert!(cov.abs().max() < 1e-8);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let spec = KernelSpec::isotropic(1.7, 0.1, 1, 0.01).unwrap();
        let post = GpPosterior::fit(&col(&[0.0, 0.1]), &DVector::from_vec(vec![3.0, 2.0]), &spec).unwrap();
        let (m, v) = post.mean_var(&col(&[50.0])).unwrap();
        assert!(m[0].abs() < 1e-6);
        assert!((v[0] - 1.7).abs() < 1e-6);
    }

    #[test]
    fn incremental_observation_matches_refit() {
        let spec = KernelSpec::isotropic(1.0, 0.3, 1, 0.05).unwrap();
        let x = col(&[0.0, 0.5]);
        let y = DVector::from_vec(vec![1.0, -0.5]);
        let post = GpPosterior::fit(&x, &y, &spec).unwrap();
        let grown = post
            .with_observation(&RowDVector::from_vec(vec![0.8]), 0.2, 0.3)
            .unwrap();
        let full = GpPosterior::fit_with_noise(
            &col(&[0.0, 0.5, 0.8]),
            &DVector::from_vec(vec![1.0, -0.5, 0.2]),
            &spec,
            &DVector::from_vec(vec![0.05, 0.05, 0.3]),
        )
        .unwrap();
        let q = col(&[0.1, 0.6, 2.0]);
        let (m1, c1) = grown.mean_cov(&q).unwrap();
        let (m2, c2) = full.mean_cov(&q).unwrap();
        assert!((m1 - m2).abs().max() < 1e-12);
        assert!((c1 - c2).abs().max() < 1e-12);
    }

    #[test]
    fn point_eval_matches_batch() {
        let spec = KernelSpec::new(1.3, vec![0.4, 0.9], 0.02).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.1, 0.5, -0.2, 0.9, 0.4]);
        let post = GpPosterior::fit(&x, &DVector::from_vec(vec![0.1, 0.4, -0.3]), &spec).unwrap();
        let q = DMatrix::from_row_slice(1, 2, &[0.3, 0.2]);
        let (m, v) = post.mean_var(&q).unwrap();
        let (pm, pv) = post.point_mean_var(&[0.3, 0.2]);
        assert!((m[0] - pm).abs() < 1e-14);
        assert!((v[0] - pv).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let spec = KernelSpec::isotropic(1.0, 0.3, 1, 0.0).unwrap();
        let post = GpPosterior::fit(&col(&[0.0]), &DVector::from_vec(vec![1.0]), &spec).unwrap();
        let q = col(&[0.2, 0.5, 0.9]);
        let a = post.sample(&q, 5, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = post.sample(&q, 5, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(post.sample(&q, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().nrows(), 0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = KernelSpec::isotropic(1.0, 0.3, 2, 0.0).unwrap();
        assert!(GpPosterior::fit(&col(&[0.0]), &DVector::from_vec(vec![1.0]), &spec).is_err());
        let post = GpPosterior::prior(&spec).unwrap();
        assert!(post.mean_cov(&col(&[0.0])).is_err());
    }
}
