//! Sample moments and matrix helpers shared by several modules.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Central moments `(mean, variance, skewness, excess kurtosis)` with the
/// population (1/n) normalization.
pub fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Sample covariance (n - 1 normalization) of the columns of `data`.
pub fn covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let means = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    (centered.transpose() * &centered) / (n as f64 - 1.0)
}

pub fn correlation(data: &DMatrix<f64>) -> DMatrix<f64> {
    cov_to_corr(&covariance(data))
}

pub fn cov_to_corr(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        if i == j {
            1.0
        } else if d[i] > 0.0 && d[j] > 0.0 {
            cov[(i, j)] / (d[i] * d[j])
        } else {
            0.0
        }
    })
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

fn clip_eigen(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&clipped) * q.transpose()
}

/// Nearest correlation matrix by alternating projections with Dykstra's
/// correction, followed by a final eigenvalue clip and diagonal rescale so
/// the result is exactly unit-diagonal and PSD. Returns the matrix and
/// whether the input needed repair.
pub fn nearest_correlation(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (a + a.transpose()) * 0.5;
    if min_eigenvalue(&sym) >= 0.0 {
        return (sym, false);
    }
    let n = sym.nrows();
    let mut y = sym.clone();
    let mut correction = DMatrix::zeros(n, n);
    for _ in 0..500 {
        let r = &y - &correction;
        let x = clip_eigen(&r, 0.0);
        correction = &x - &r;
        let mut next = x.clone();
        for i in 0..n {
            next[(i, i)] = 1.0;
        }
        let diff = (&next - &y).norm();
        y = next;
        if diff < 1e-12 {
            break;
        }
    }
    let x = clip_eigen(&y, 0.0);
    let d: Vec<f64> = x.diagonal().iter().map(|v| v.max(1e-300).sqrt()).collect();
    let mut out = DMatrix::from_fn(n, n, |i, j| x[(i, j)] / (d[i] * d[j]));
    out = (&out + out.transpose()) * 0.5;
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    (out, true)
}

/// Cholesky-like factor `A` with `A Aᵀ = c` for PSD `c`, using the
/// eigen decomposition so singular matrices are fine.
pub fn psd_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = c.clone().cholesky() {
        return ch.l();
    }
    let eig = SymmetricEigen::new(c.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root)
}
