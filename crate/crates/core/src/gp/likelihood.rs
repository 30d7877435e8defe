use nalgebra::{DMatrix, DVector};

use super::kernel::KernelSpec;
use super::posterior::GpPosterior;
use crate::error::Result;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `-log N(y | 0, K + noise·I)`.
pub fn negative_log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, spec: &KernelSpec) -> Result<f64> {
    let post = GpPosterior::fit(x, y, spec)?;
    Ok(nll_of(&post))
}

pub(crate) fn nll_of(post: &GpPosterior) -> f64 {
    let n = post.len() as f64;
    let log_det_half: f64 = post.chol_factor().diagonal().iter().map(|d| d.ln()).sum();
    0.5 * post.train_targets().dot(post.alpha()) + log_det_half + 0.5 * n * LN_2PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_zero_target() {
        let spec = KernelSpec::isotropic(0.7, 1.0, 1, 0.3).unwrap();
        let nll = negative_log_likelihood(
            &DMatrix::from_row_slice(1, 1, &[0.2]),
            &DVector::from_vec(vec![0.0]),
            &spec,
        )
        .unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI * 1.0).ln();
        assert!((nll - expect).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant() {
        let spec = KernelSpec::isotropic(1.0, 0.4, 1, 0.1).unwrap();
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.3, 0.9]);
        let y = DVector::from_vec(vec![0.5, -0.2, 1.1]);
        let xp = DMatrix::from_row_slice(3, 1, &[0.9, 0.0, 0.3]);
        let yp = DVector::from_vec(vec![1.1, 0.5, -0.2]);
        let a = negative_log_likelihood(&x, &y, &spec).unwrap();
        let b = negative_log_likelihood(&xp, &yp, &spec).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
