use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Squared-exponential (RBF) kernel with per-dimension lengthscales.
///
/// A lengthscale of `+inf` switches its dimension off entirely, which is how
/// the synthetic family expresses the `θ = 0` and `θ = π/2` endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let spec = KernelSpec {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic(signal_variance: f64, lengthscale: f64, dim: usize, noise_variance: f64) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale; dim], noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::Input(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if let Some(ls) = self.lengthscales.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::Input(format!("lengthscale must be positive, got {ls}")));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Input(format!(
                "noise variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Covariance between two points (no noise term).
    #[inline]
    pub fn eval(&self, a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
        let mut sq = 0.0;
        for ((x, y), ls) in a.zip(b).zip(&self.lengthscales) {
            let r = (x - y) / ls;
            sq += r * r;
        }
        self.signal_variance * (-0.5 * sq).exp()
    }

    fn check_cols(&self, x: &DMatrix<f64>, what: &str) -> Result<()> {
        if x.ncols() != self.dim() {
            return dim_err(format!(
                "{what} has {} columns but the kernel has {} lengthscales",
                x.ncols(),
                self.dim()
            ));
        }
        Ok(())
    }
}

/// Dense cross-covariance `K(X1, X2)`.
///
/// With `add_noise` the noise variance lands on the diagonal, which only makes
/// sense when `X1` and `X2` are the same point set; anything else is rejected.
pub fn kernel_matrix(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    spec: &KernelSpec,
    add_noise: bool,
) -> Result<DMatrix<f64>> {
    spec.check_cols(x1, "X1")?;
    spec.check_cols(x2, "X2")?;
    let same = std::ptr::eq(x1, x2) || x1 == x2;
    if add_noise && !same {
        return Err(Error::Input(
            "noise can only be added to the covariance of a point set with itself".into(),
        ));
    }
    let mut k = if same {
        let n = x1.nrows();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = spec.signal_variance;
            for j in 0..i {
                let v = spec.eval(x1.row(i).iter().copied(), x1.row(j).iter().copied());
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    } else {
        cross(x1, x2, spec)
    };
    if add_noise {
        for i in 0..k.nrows() {
            k[(i, i)] += spec.noise_variance;
        }
    }
    Ok(k)
}

pub(crate) fn cross(x1: &DMatrix<f64>, x2: &DMatrix<f64>, spec: &KernelSpec) -> DMatrix<f64> {
    DMatrix::from_fn(x1.nrows(), x2.nrows(), |i, j| {
        spec.eval(x1.row(i).iter().copied(), x2.row(j).iter().copied())
    })
}
