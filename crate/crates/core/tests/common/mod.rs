//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the library's linear algebra: covariances are built entry by entry and
//! inverted with a plain LU inverse.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Squared-exponential covariance written out directly.
pub fn rbf(a: &[f64], b: &[f64], signal_variance: f64, lengthscales: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(lengthscales) {
        if l.is_finite() {
            s += (x - y) * (x - y) / (l * l);
        }
    }
    signal_variance * (-0.5 * s).exp()
}

pub fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

pub fn gram(x1: &DMatrix<f64>, x2: &DMatrix<f64>, sv: f64, ls: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x1.nrows(), x2.nrows(), |i, j| rbf(&row(x1, i), &row(x2, j), sv, ls))
}

/// GP conditioned by explicit matrix inversion.
pub struct DenseGp {
    x: DMatrix<f64>,
    kinv: DMatrix<f64>,
    alpha: DVector<f64>,
    sv: f64,
    ls: Vec<f64>,
}

impl DenseGp {
    /// `noise[i]` is the observation noise variance of row `i`.
    pub fn new(x: &DMatrix<f64>, y: &[f64], noise: &[f64], sv: f64, ls: &[f64]) -> Self {
        let mut k = gram(x, x, sv, ls);
        for i in 0..k.nrows() {
            k[(i, i)] += noise[i];
        }
        let kinv = if x.nrows() == 0 { k } else { k.try_inverse().expect("oracle covariance must be invertible") };
        let alpha = &kinv * DVector::from_column_slice(y);
        DenseGp { x: x.clone(), kinv, alpha, sv, ls: ls.to_vec() }
    }

    /// Latent mean and covariance at the rows of `xq`.
    pub fn predict(&self, xq: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let kqq = gram(xq, xq, self.sv, &self.ls);
        if self.x.nrows() == 0 {
            return (DVector::zeros(xq.nrows()), kqq);
        }
        let kq = gram(&self.x, xq, self.sv, &self.ls);
        let mean = kq.transpose() * &self.alpha;
        let cov = kqq - kq.transpose() * &self.kinv * &kq;
        (mean, cov)
    }

    /// Latent mean and variance at one point.
    pub fn point(&self, q: &[f64]) -> (f64, f64) {
        let n = self.x.nrows();
        let k = DVector::from_fn(n, |i, _| rbf(&row(&self.x, i), q, self.sv, &self.ls));
        let mean = if n == 0 { 0.0 } else { k.dot(&self.alpha) };
        let var = if n == 0 { self.sv } else { self.sv - (k.transpose() * &self.kinv * &k)[(0, 0)] };
        (mean, var)
    }
}

/// Negative log marginal likelihood from an explicit inverse and determinant.
pub fn dense_nll(x: &DMatrix<f64>, y: &[f64], sv: f64, ls: &[f64], noise: f64) -> f64 {
    let n = y.len();
    let mut k = gram(x, x, sv, ls);
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let det = k.clone().lu().determinant();
    let kinv = k.try_inverse().unwrap();
    let yv = DVector::from_column_slice(y);
    0.5 * (yv.transpose() * kinv * &yv)[(0, 0)] + 0.5 * det.ln() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Draws from `N(mean, cov)` through the oracle's own factorisation.
pub struct MvnSampler {
    mean: DVector<f64>,
    l: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let mut c = cov.clone();
        // eigen-decomposition square root tolerates singular covariances
        let eig = c.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        c = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        MvnSampler { mean, l: c }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let k = self.mean.len();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &self.l * z;
        for c in 0..k {
            out[c] = self.mean[c] + v[c];
        }
    }
}

/// Column indices of the `n` largest values, ties to the lowest index.
pub fn top_n(values: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Random symmetric positive definite matrix.
pub fn random_spd<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(k, k) * 0.05
}

/// `E[max(Y − y_max, 0)]` for `Y ~ N(mean, sd²)` by composite Simpson
/// integration over ±12 standard deviations.
pub fn ei_by_quadrature(mean: f64, sd: f64, y_max: f64) -> f64 {
    if sd == 0.0 {
        return (mean - y_max).max(0.0);
    }
    let lo = y_max.max(mean - 12.0 * sd);
    let hi = mean + 12.0 * sd;
    if hi <= lo {
        return 0.0;
    }
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let f = |y: f64| {
        let z = (y - mean) / sd;
        (y - y_max) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut s = f(lo) + f(hi);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// Top-`n_top` membership frequencies over `m` joint draws. Columns with a
/// `Some` entry in `fixed` keep that value in every draw; the rest come from
/// `sampler` in order.
pub fn mining_frequencies<R: Rng + ?Sized>(
    sampler: &MvnSampler,
    fixed: &[Option<f64>],
    n_top: usize,
    m: usize,
    rng: &mut R,
) -> Vec<f64> {
    let k = fixed.len();
    let open: Vec<usize> = (0..k).filter(|&c| fixed[c].is_none()).collect();
    let mut hits = vec![0usize; k];
    let mut free = vec![0.0; open.len()];
    let mut full = vec![0.0; k];
    for _ in 0..m {
        sampler.draw(rng, &mut free);
        for c in 0..k {
            if let Some(v) = fixed[c] {
                full[c] = v;
            }
        }
        for (j, &c) in open.iter().enumerate() {
            full[c] = free[j];
        }
        for c in top_n(&full, n_top) {
            hits[c] += 1;
        }
    }
    hits.iter().map(|&h| h as f64 / m as f64).collect()
}

/// `m` draws of the `n_top`-th largest value, sorted ascending.
pub fn order_statistic_draws<R: Rng + ?Sized>(
    sampler: &MvnSampler,
    fixed: &[Option<f64>],
    n_top: usize,
    m: usize,
    rng: &mut R,
) -> Vec<f64> {
    let k = fixed.len();
    let open: Vec<usize> = (0..k).filter(|&c| fixed[c].is_none()).collect();
    let mut free = vec![0.0; open.len()];
    let mut full = vec![0.0; k];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        sampler.draw(rng, &mut free);
        for c in 0..k {
            if let Some(v) = fixed[c] {
                full[c] = v;
            }
        }
        for (j, &c) in open.iter().enumerate() {
            full[c] = free[j];
        }
        let mut sorted = full.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        out.push(sorted[n_top - 1]);
    }
    out.sort_by(f64::total_cmp);
    out
}
