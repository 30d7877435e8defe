use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Diagonal jitter tried, in order, when a Cholesky factorisation fails.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Lower Cholesky factor of a symmetric positive definite matrix, escalating
/// diagonal jitter on failure. Returns the factor and the jitter that worked.
pub fn cholesky_jittered(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut m = k.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol.unpack(), jitter));
        }
    }
    Err(Error::Numerical(format!(
        "{0}x{0} covariance is not positive definite even with jitter {1:e}",
        k.nrows(),
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

/// Cholesky-style square root of a positive *semi*-definite matrix.
///
/// Pivots that collapse below a relative tolerance zero out their column
/// instead of failing, so a zero covariance yields a zero factor and draws
/// equal the mean exactly.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let n = cov.nrows();
    let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    l
}

/// `m` draws of `mean + factor · z`, one per row.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    m: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let k = mean.len();
    let mut out = DMatrix::zeros(m, k);
    let mut z = DVector::zeros(k);
    for r in 0..m {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let draw = factor * &z;
        for c in 0..k {
            out[(r, c)] = mean[c] + draw[c];
        }
    }
    out
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    l.solve_lower_triangular(b)
        .expect("triangular factor has a zero pivot")
}

pub fn solve_lower_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("triangular factor has a zero pivot")
}

/// Solves `(L Lᵀ) x = b`.
pub fn cho_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = solve_lower_vec(l, b);
    l.tr_solve_lower_triangular(&y)
        .expect("triangular factor has a zero pivot")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psd_factor_reconstructs_rank_deficient_matrix() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]);
        let cov = &v * v.transpose();
        let l = psd_factor(&cov);
        let back = &l * l.transpose();
        assert!((back - cov).abs().max() < 1e-12);
    }

    #[test]
    fn zero_covariance_draws_are_the_mean() {
        let mean = DVector::from_vec(vec![1.0, -2.0]);
        let l = psd_factor(&DMatrix::zeros(2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = sample_mvn(&mean, &l, 4, &mut rng);
        for r in 0..4 {
            assert_eq!(draws[(r, 0)], 1.0);
            assert_eq!(draws[(r, 1)], -2.0);
        }
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let cov = DMatrix::from_element(2, 2, 1.0);
        let (l, jitter) = cholesky_jittered(&cov).unwrap();
        assert!(jitter > 0.0);
        let back = &l * l.transpose();
        assert!((back - cov).abs().max() < 1e-5);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_jittered(&cov), Err(Error::Numerical(_))));
    }
}
