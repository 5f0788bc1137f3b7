//! Mean-variance and mean-CVaR frontiers over a budget-constrained
//! portfolio, traced over a grid of risk-aversion weights `γ`: each point
//! maximizes `γ·E(r_p) − (1−γ)·risk(r_p)`.

pub mod lp;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::var_cvar;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RiskMeasure {
    Variance,
    Cvar { level: f64 },
}

impl RiskMeasure {
    pub fn label(&self) -> String {
        match self {
            RiskMeasure::Variance => "variance".into(),
            RiskMeasure::Cvar { level } => format!("cvar({level})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub gamma: f64,
    pub weights: Vec<f64>,
    pub expected_return: f64,
    /// Portfolio variance, or empirical CVaR on the loss scale.
    pub risk: f64,
    pub risk_measure: RiskMeasure,
    /// KKT residual (variance) or LP duality gap (CVaR).
    pub certificate: f64,
    /// True when a ridge was added to a singular covariance.
    pub ridge: bool,
}

impl FrontierPoint {
    pub fn objective(&self) -> f64 {
        self.gamma * self.expected_return - (1.0 - self.gamma) * self.risk
    }
}

/// `{0, 0.01, …, 0.99}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..100).map(|i| i as f64 / 100.0).collect()
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::invalid(format!("gamma must lie in [0, 1], got {g}")));
    }
    Ok(())
}

/// Weights for `γ = 1`: everything on the best mean, split evenly on ties.
fn argmax_weights(mu: &DVector<f64>) -> Vec<f64> {
    let best = mu.max();
    let tol = 1e-14 * best.abs().max(1e-300);
    let hits: Vec<usize> = (0..mu.len()).filter(|&i| best - mu[i] <= tol).collect();
    let mut w = vec![0.0; mu.len()];
    for &i in &hits {
        w[i] = 1.0 / hits.len() as f64;
    }
    w
}

/// Frontier from a mean vector and covariance.
pub fn mean_variance_from_moments(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gammas: &[f64],
    long_only: bool,
) -> Result<Vec<FrontierPoint>> {
    let l = mu.len();
    if l < 2 {
        return Err(Error::short("a frontier needs at least two assets"));
    }
    if sigma.nrows() != l || sigma.ncols() != l {
        return Err(Error::Mismatch(format!("{l} means, {}x{} covariance", sigma.nrows(), sigma.ncols())));
    }
    check_gammas(gammas)?;
    let scale = sigma.trace() / l as f64;
    let singular = linalg::min_eigenvalue(sigma) <= 1e-12 * scale.max(f64::MIN_POSITIVE);
    let sigma = if singular {
        log::warn!("singular covariance: adding a ridge");
        sigma + DMatrix::identity(l, l) * (1e-10 * scale.max(1e-300))
    } else {
        sigma.clone()
    };
    let points: Vec<Result<FrontierPoint>> = gammas
        .par_iter()
        .map(|&gamma| {
            let (w, certificate) = if gamma == 1.0 {
                if !long_only && mu.iter().any(|m| *m != mu[0]) {
                    return Err(Error::Undefined("signed frontier is unbounded at gamma = 1".into()));
                }
                (DVector::from_vec(argmax_weights(mu)), 0.0)
            } else {
                let q = &sigma * (2.0 * (1.0 - gamma));
                let c = mu * gamma;
                let s = qp::solve(&q, &c, long_only)?;
                (s.w, s.kkt_residual)
            };
            Ok(FrontierPoint {
                gamma,
                expected_return: mu.dot(&w),
                risk: (w.transpose() * &sigma * &w)[(0, 0)],
                weights: w.as_slice().to_vec(),
                risk_measure: RiskMeasure::Variance,
                certificate,
                ridge: singular,
            })
        })
        .collect();
    keep_bounded(points, long_only)
}

/// Frontier from a sample (rows are observations or scenarios).
pub fn mean_variance_frontier(data: &DMatrix<f64>, gammas: &[f64], long_only: bool) -> Result<Vec<FrontierPoint>> {
    if data.nrows() < 2 {
        return Err(Error::short("covariance needs at least two rows"));
    }
    let mu = data.row_mean().transpose();
    let sigma = linalg::covariance(data);
    mean_variance_from_moments(&mu, &sigma, gammas, long_only)
}

/// Number of tail scenarios in the CVaR at level `q`.
pub fn tail_size(s: usize, q: f64) -> usize {
    ((q * s as f64).ceil() as usize).clamp(1, s)
}

/// Empirical CVaR of the portfolio `w` over the scenario rows.
pub fn portfolio_cvar(scenarios: &DMatrix<f64>, w: &[f64], q: f64) -> Result<f64> {
    let wv = DVector::from_column_slice(w);
    let r = scenarios * wv;
    Ok(var_cvar(r.as_slice(), q)?.1)
}

/// One mean-CVaR point. The auxiliary-variable LP (threshold `ζ`, one hinge
/// per scenario, hinge weight `1/⌈qS⌉`) is solved through its dual, which
/// has only `L + 1` rows:
///
/// `max ν` s.t. `Σ_s r_si π_s + ν + t_i = −γμ_i`, `Σ_s π_s = 1 − γ`,
/// `0 ≤ π_s ≤ (1−γ)/⌈qS⌉`, `t_i ≥ 0` (`t_i = 0` for signed weights).
///
/// Primal weights are minus the simplex multipliers of the first `L` rows.
pub fn mean_cvar_point(scenarios: &DMatrix<f64>, q: f64, gamma: f64, long_only: bool) -> Result<FrontierPoint> {
    let (_, l) = scenarios.shape();
    cvar_point_from(scenarios, q, gamma, long_only, &vec![1.0 / l as f64; l])
}

/// As [`mean_cvar_point`], with the simplex started from the worst tail of
/// the portfolio `hint`.
fn cvar_point_from(scenarios: &DMatrix<f64>, q: f64, gamma: f64, long_only: bool, hint: &[f64]) -> Result<FrontierPoint> {
    let (s, l) = scenarios.shape();
    let mu = scenarios.row_mean().transpose();
    let measure = RiskMeasure::Cvar { level: q };
    if gamma == 1.0 {
        if !long_only && mu.iter().any(|m| *m != mu[0]) {
            return Err(Error::Undefined("signed frontier is unbounded at gamma = 1".into()));
        }
        let w = argmax_weights(&mu);
        return Ok(FrontierPoint {
            gamma,
            expected_return: mu.dot(&DVector::from_column_slice(&w)),
            risk: portfolio_cvar(scenarios, &w, q)?,
            weights: w,
            risk_measure: measure,
            certificate: 0.0,
            ridge: false,
        });
    }
    let k = tail_size(s, q);
    let m = l + 1;
    let n_slack = if long_only { l } else { 0 };
    let n = s + 1 + n_slack;
    let mut a = vec![0.0; m * n];
    for sc in 0..s {
        for i in 0..l {
            a[sc * m + i] = scenarios[(sc, i)];
        }
        a[sc * m + l] = 1.0;
    }
    for i in 0..l {
        a[s * m + i] = 1.0;
    }
    for i in 0..n_slack {
        a[(s + 1 + i) * m + i] = 1.0;
    }
    let mut b: Vec<f64> = mu.iter().map(|v| -gamma * v).collect();
    b.push(1.0 - gamma);
    let mut c = vec![0.0; n];
    c[s] = -1.0;
    let cap = (1.0 - gamma) / k as f64;
    let mut lower = vec![0.0; n];
    let mut upper = vec![cap; n];
    lower[s] = f64::NEG_INFINITY;
    upper[s] = f64::INFINITY;
    for j in s + 1..n {
        upper[j] = f64::INFINITY;
    }
    // Start with the k worst scenarios of the hint portfolio at their cap,
    // which already satisfies the last row.
    let eq = scenarios * DVector::from_column_slice(hint);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&x, &y| eq[x].total_cmp(&eq[y]).then(x.cmp(&y)));
    let mut start = vec![0.0; n];
    for &sc in order.iter().take(k) {
        start[sc] = cap;
    }
    let problem = lp::Lp { m, n, a, b, c, lower, upper };
    let sol = match lp::solve(&problem, &start, 200 * (s + l) + 1000) {
        // the dual is infeasible exactly when the primal is unbounded
        Err(Error::Infeasible(_)) if !long_only => {
            return Err(Error::Undefined(format!("signed mean-CVaR objective is unbounded at gamma = {gamma}")));
        }
        other => other?,
    };

    let mut w: Vec<f64> = sol.y[..l].iter().map(|v| -v).collect();
    if long_only {
        for v in w.iter_mut() {
            if *v <= 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }
    }
    let wv = DVector::from_column_slice(&w);
    let expected_return = mu.dot(&wv);
    let risk = portfolio_cvar(scenarios, &w, q)?;
    let primal = gamma * expected_return - (1.0 - gamma) * risk;
    let dual = -sol.x[s];
    Ok(FrontierPoint {
        gamma,
        weights: w,
        expected_return,
        risk,
        risk_measure: measure,
        certificate: (primal - dual).abs(),
        ridge: false,
    })
}

pub fn mean_cvar_frontier(
    scenarios: &DMatrix<f64>,
    q: f64,
    gammas: &[f64],
    long_only: bool,
) -> Result<Vec<FrontierPoint>> {
    let (s, l) = scenarios.shape();
    if l < 2 {
        return Err(Error::short("a frontier needs at least two assets"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("CVaR level must lie in (0, 1), got {q}")));
    }
    if (s as f64) < 1.0 / q {
        return Err(Error::short(format!("{s} scenarios are fewer than 1/q = {}", 1.0 / q)));
    }
    check_gammas(gammas)?;
    // Sequential so each point starts from its neighbour's tail; adjacent
    // optima share most of their tail scenarios.
    let mut hint = vec![1.0 / l as f64; l];
    let mut points = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let p = cvar_point_from(scenarios, q, g, long_only, &hint);
        if let Ok(p) = &p {
            hint.clone_from(&p.weights);
        }
        points.push(p);
    }
    keep_bounded(points, long_only)
}

/// Signed frontiers lose the points where the objective is unbounded.
fn keep_bounded(points: Vec<Result<FrontierPoint>>, long_only: bool) -> Result<Vec<FrontierPoint>> {
    let points_was_empty = points.is_empty();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        match p {
            Err(Error::Undefined(msg)) if !long_only => log::warn!("{msg}; point dropped"),
            other => out.push(other?),
        }
    }
    if out.is_empty() && !points_was_empty {
        return Err(Error::Undefined("signed frontier is unbounded at every gamma".into()));
    }
    Ok(out)
}
