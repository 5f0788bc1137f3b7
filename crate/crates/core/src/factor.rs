//! Maximum-likelihood factor analysis, `Σ = ββᵀ + D` with unit-variance
//! uncorrelated factors.
//!
//! Each restart runs EM to a small change in the discrepancy, then BFGS on
//! the uniquenesses with the loadings profiled out. The profile step takes
//! the top eigenpairs of `D^{-1/2} S D^{-1/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{bfgs, BfgsOptions};
use crate::rng::{substream, Domain};

pub const UNIQUENESS_FLOOR: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorOptions {
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_em_iter: usize,
    /// Floor on uniquenesses, relative to the variable's variance.
    pub floor: f64,
    /// Fit the covariance instead of the correlation matrix.
    pub covariance: bool,
    pub varimax: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            tol: 1e-9,
            max_em_iter: 20_000,
            floor: UNIQUENESS_FLOOR,
            covariance: false,
            varimax: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub countries: Vec<String>,
    pub m: usize,
    pub n: usize,
    /// `L` rows of `m` loadings.
    pub loadings: Vec<Vec<f64>>,
    pub uniquenesses: Vec<f64>,
    pub log_likelihood: f64,
    /// Bartlett-corrected likelihood-ratio statistic.
    pub lr_statistic: f64,
    pub lr_df: i64,
    /// `None` when the model is saturated (`df = 0`).
    pub lr_pvalue: Option<f64>,
    pub converged: bool,
    /// Variables whose uniqueness sits on the floor.
    pub heywood: Vec<bool>,
    pub covariance_mode: bool,
    pub rotated: bool,
    /// Column means and scales used to standardize data for scores.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub restart: usize,
}

impl FactorModel {
    pub fn loadings_matrix(&self) -> DMatrix<f64> {
        let l = self.loadings.len();
        DMatrix::from_fn(l, self.m, |i, j| self.loadings[i][j])
    }

    pub fn fitted(&self) -> DMatrix<f64> {
        let b = self.loadings_matrix();
        &b * b.transpose() + DMatrix::from_diagonal(&DVector::from_column_slice(&self.uniquenesses))
    }

    pub fn communalities(&self) -> Vec<f64> {
        self.loadings.iter().map(|r| r.iter().map(|v| v * v).sum()).collect()
    }
}

/// `ln|Σ| + tr(Σ⁻¹S) − ln|S| − L`, zero when `Σ = S`.
pub fn discrepancy(sigma: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<f64> {
    let l = s.nrows() as f64;
    let cs = sigma.clone().cholesky()?;
    let css = s.clone().cholesky()?;
    let ld = 2.0 * cs.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lds = 2.0 * css.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let tr = (cs.inverse() * s).trace();
    Some(ld + tr - lds - l)
}

/// Gaussian log-likelihood of `n` observations whose sample matrix is `s`.
pub fn gaussian_log_likelihood(sigma: &DMatrix<f64>, s: &DMatrix<f64>, n: usize) -> Option<f64> {
    let cs = sigma.clone().cholesky()?;
    let ld = 2.0 * cs.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let tr = (cs.inverse() * s).trace();
    let l = s.nrows() as f64;
    Some(-0.5 * n as f64 * (ld + tr + l * (2.0 * std::f64::consts::PI).ln()))
}

/// Best loadings for fixed uniquenesses.
fn profile_loadings(s: &DMatrix<f64>, psi: &[f64], m: usize) -> DMatrix<f64> {
    let l = s.nrows();
    let root: Vec<f64> = psi.iter().map(|p| p.sqrt()).collect();
    let sstar = DMatrix::from_fn(l, l, |i, j| s[(i, j)] / (root[i] * root[j]));
    let eig = SymmetricEigen::new(sstar);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut lam = DMatrix::zeros(l, m);
    for (k, &idx) in order.iter().take(m).enumerate() {
        let scale = (eig.eigenvalues[idx] - 1.0).max(0.0).sqrt();
        for i in 0..l {
            lam[(i, k)] = root[i] * eig.eigenvectors[(i, idx)] * scale;
        }
    }
    lam
}

fn model_matrix(lam: &DMatrix<f64>, psi: &[f64]) -> DMatrix<f64> {
    lam * lam.transpose() + DMatrix::from_diagonal(&DVector::from_column_slice(psi))
}

struct Run {
    psi: Vec<f64>,
    value: f64,
    converged: bool,
}

/// EM from `psi0`, then a BFGS polish of the non-floored uniquenesses.
fn fit_from(s: &DMatrix<f64>, m: usize, psi0: Vec<f64>, floors: &[f64], opts: &FactorOptions) -> Option<Run> {
    let l = s.nrows();
    let mut psi = psi0;
    let mut lam = profile_loadings(s, &psi, m);
    let mut value = discrepancy(&model_matrix(&lam, &psi), s)?;
    let mut em_converged = false;
    for _ in 0..opts.max_em_iter {
        let sigma = model_matrix(&lam, &psi);
        let inv = sigma.cholesky()?.inverse();
        let beta = lam.transpose() * &inv;
        let czz = DMatrix::identity(m, m) - &beta * &lam + &beta * s * beta.transpose();
        let sxz = s * beta.transpose();
        let new_lam = &sxz * czz.try_inverse()?;
        let new_psi: Vec<f64> = (0..l)
            .map(|i| {
                let v = s[(i, i)] - (new_lam.row(i) * sxz.row(i).transpose())[(0, 0)];
                v.max(floors[i])
            })
            .collect();
        let new_value = discrepancy(&model_matrix(&new_lam, &new_psi), s)?;
        let change = value - new_value;
        lam = new_lam;
        psi = new_psi;
        value = new_value;
        if change.abs() < opts.tol {
            em_converged = true;
            break;
        }
    }

    // Polish on u = ln(ψ − floor) over the variables off the floor.
    let free: Vec<usize> = (0..l).filter(|&i| psi[i] > floors[i] * (1.0 + 1e-6)).collect();
    if free.is_empty() {
        return Some(Run { psi, value, converged: em_converged });
    }
    let base = psi.clone();
    let expand = |u: &[f64]| {
        let mut p = base.clone();
        for (k, &i) in free.iter().enumerate() {
            p[i] = floors[i] + u[k].exp();
        }
        p
    };
    let objective = |u: &[f64]| {
        let p = expand(u);
        let lam = profile_loadings(s, &p, m);
        discrepancy(&model_matrix(&lam, &p), s).unwrap_or(f64::INFINITY)
    };
    // dF/dψ_i = [Σ⁻¹(Σ − S)Σ⁻¹]_ii at the profiled loadings
    let gradient = |u: &[f64]| {
        let p = expand(u);
        let lam = profile_loadings(s, &p, m);
        let sigma = model_matrix(&lam, &p);
        let Some(ch) = sigma.clone().cholesky() else {
            return vec![f64::NAN; u.len()];
        };
        let inv = ch.inverse();
        let g = &inv * (&sigma - s) * &inv;
        free.iter()
            .enumerate()
            .map(|(k, &i)| g[(i, i)] * u[k].exp())
            .collect()
    };
    let u0: Vec<f64> = free.iter().map(|&i| (psi[i] - floors[i]).ln()).collect();
    let opt = BfgsOptions { max_iter: 2_000, grad_tol: 1e-10, f_tol: 1e-15 };
    let res = bfgs(objective, gradient, &u0, &opt);
    if res.value.is_finite() && res.value <= value {
        let g = gradient(&res.x);
        let gmax = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let p = expand(&res.x);
        return Some(Run { psi: p, value: res.value, converged: res.converged || gmax < 1e-7 || em_converged });
    }
    Some(Run { psi, value, converged: em_converged })
}

fn varimax(lam: &DMatrix<f64>) -> DMatrix<f64> {
    let (l, m) = lam.shape();
    if m < 2 {
        return lam.clone();
    }
    // Kaiser normalization
    let h: Vec<f64> = (0..l).map(|i| lam.row(i).norm().max(1e-300)).collect();
    let x = DMatrix::from_fn(l, m, |i, j| lam[(i, j)] / h[i]);
    let mut rot = DMatrix::<f64>::identity(m, m);
    let mut d_old = 0.0;
    for _ in 0..1000 {
        let z = &x * &rot;
        let col_ss: Vec<f64> = (0..m).map(|j| z.column(j).norm_squared()).collect();
        let b = DMatrix::from_fn(l, m, |i, j| z[(i, j)].powi(3) - z[(i, j)] * col_ss[j] / l as f64);
        let svd = (x.transpose() * b).svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        rot = u * vt;
        let d = svd.singular_values.sum();
        if d < d_old * (1.0 + 1e-12) {
            break;
        }
        d_old = d;
    }
    let z = x * rot;
    DMatrix::from_fn(l, m, |i, j| z[(i, j)] * h[i])
}

/// Fix column signs so each column's largest-magnitude loading is positive.
fn canonical_signs(lam: &mut DMatrix<f64>) {
    for j in 0..lam.ncols() {
        let col = lam.column(j);
        let idx = col.iamax();
        if col[idx] < 0.0 {
            lam.column_mut(j).neg_mut();
        }
    }
}

/// Fit `m` factors to the `n × L` return matrix.
pub fn ml_factor_fit(
    returns: &DMatrix<f64>,
    countries: Vec<String>,
    m: usize,
    opts: &FactorOptions,
) -> Result<FactorModel> {
    let (n, l) = returns.shape();
    if countries.len() != l {
        return Err(Error::Mismatch(format!("{} countries for {l} columns", countries.len())));
    }
    if m == 0 {
        return Err(Error::invalid("factor count must be >= 1"));
    }
    if !(n > l && l > m) {
        return Err(Error::short(format!("factor analysis needs n > L > m, got n = {n}, L = {l}, m = {m}")));
    }
    let df = (((l - m) * (l - m)) as i64 - (l + m) as i64) / 2;
    if df < 0 {
        return Err(Error::invalid(format!("{m} factors on {l} variables leave negative degrees of freedom")));
    }
    let means: Vec<f64> = (0..l).map(|j| returns.column(j).mean()).collect();
    let cov = linalg::covariance(returns);
    if let Some(j) = (0..l).find(|&j| !(cov[(j, j)] > 0.0)) {
        return Err(Error::degenerate(format!("column `{}` has zero variance", countries[j])));
    }
    let (s, scales) = if opts.covariance {
        (cov.clone(), vec![1.0; l])
    } else {
        (linalg::cov_to_corr(&cov), (0..l).map(|j| cov[(j, j)].sqrt()).collect())
    };
    if s.clone().cholesky().is_none() {
        return Err(Error::degenerate("sample matrix is singular"));
    }
    let floors: Vec<f64> = (0..l).map(|i| opts.floor * s[(i, i)]).collect();
    let sinv = s.clone().try_inverse().ok_or_else(|| Error::degenerate("sample matrix is singular"))?;
    let base_start: Vec<f64> = (0..l)
        .map(|i| ((1.0 - 0.5 * m as f64 / l as f64) / sinv[(i, i)]).max(floors[i]))
        .collect();
    let runs: Vec<Option<Run>> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                base_start.clone()
            } else {
                let mut rng = substream(opts.seed, Domain::FactorRestarts, r as u64);
                (0..l).map(|i| s[(i, i)] * rng.random_range(0.1..0.95)).collect()
            };
            fit_from(&s, m, start, &floors, opts)
        })
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::NonConvergence("every factor-analysis restart failed".into()))?;

    let mut lam = profile_loadings(&s, &best.psi, m);
    let rotated = opts.varimax && m > 1;
    if rotated {
        lam = varimax(&lam);
    }
    canonical_signs(&mut lam);
    let sigma = model_matrix(&lam, &best.psi);
    let log_likelihood = gaussian_log_likelihood(&sigma, &s, n)
        .ok_or_else(|| Error::degenerate("fitted covariance is not positive definite"))?;
    let bartlett = n as f64 - 1.0 - (2.0 * l as f64 + 5.0) / 6.0 - 2.0 * m as f64 / 3.0;
    let lr_statistic = bartlett * best.value.max(0.0);
    let lr_pvalue = if df > 0 {
        Some(1.0 - ChiSquared::new(df as f64).map_err(|e| Error::invalid(e.to_string()))?.cdf(lr_statistic))
    } else {
        None
    };
    let heywood: Vec<bool> = (0..l).map(|i| best.psi[i] <= floors[i] * (1.0 + 1e-6)).collect();
    for (i, h) in heywood.iter().enumerate() {
        if *h {
            log::warn!("Heywood case: uniqueness of `{}` is on the floor", countries[i]);
        }
    }
    if !best.converged {
        log::warn!("factor analysis stopped before the convergence tolerance");
    }
    Ok(FactorModel {
        countries,
        m,
        n,
        loadings: (0..l).map(|i| lam.row(i).iter().copied().collect()).collect(),
        uniquenesses: best.psi,
        log_likelihood,
        lr_statistic,
        lr_df: df,
        lr_pvalue,
        converged: best.converged,
        heywood,
        covariance_mode: opts.covariance,
        rotated,
        means,
        scales,
        restart,
    })
}

/// Countries by uniqueness, largest first; ties by country code.
pub fn order_by_uniqueness(model: &FactorModel) -> Vec<String> {
    let mut idx: Vec<usize> = (0..model.countries.len()).collect();
    idx.sort_by(|&a, &b| {
        model.uniquenesses[b]
            .total_cmp(&model.uniquenesses[a])
            .then_with(|| model.countries[a].cmp(&model.countries[b]))
    });
    idx.into_iter().map(|i| model.countries[i].clone()).collect()
}

/// Regression-method scores `βᵀ(ββᵀ + D)⁻¹ x` of the standardized rows.
pub fn factor_scores(model: &FactorModel, returns: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = model.countries.len();
    if returns.ncols() != l {
        return Err(Error::Mismatch(format!("{} columns for a {l}-variable model", returns.ncols())));
    }
    let b = model.loadings_matrix();
    let inv = model
        .fitted()
        .cholesky()
        .ok_or_else(|| Error::degenerate("fitted covariance is singular"))?
        .inverse();
    let w = b.transpose() * inv;
    let x = DMatrix::from_fn(returns.nrows(), l, |i, j| (returns[(i, j)] - model.means[j]) / model.scales[j]);
    Ok(x * w.transpose())
}
