//! Pairwise regressions, CAPM alpha and the performance/tail ratios.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionMethod {
    Ols,
    RobustIrls,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub method: RegressionMethod,
    /// Final IRLS weights; empty for OLS.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// False when IRLS stopped at `max_iter`.
    pub converged: bool,
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::Mismatch(format!("y has {} values, x has {}", y.len(), x.len())));
    }
    if y.len() < 3 {
        return Err(Error::short(format!("regression needs n >= 3, got {}", y.len())));
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression input contains non-finite values"));
    }
    let x0 = x[0];
    if x.iter().all(|&v| v == x0) {
        return Err(Error::degenerate("regressor is constant"));
    }
    Ok(())
}

/// Two-sided p-value of `t` with `df` degrees of freedom.
fn p_value(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Weighted least squares for `y = α + βx`, with standard errors from the
/// weighted residual variance.
fn wls(y: &[f64], x: &[f64], w: &[f64]) -> (f64, f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..y.len() {
        let dx = x[i] - xm;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ym);
    }
    let beta = sxy / sxx;
    let alpha = ym - beta * xm;
    let n = y.len() as f64;
    let sse: f64 = (0..y.len())
        .map(|i| w[i] * (y[i] - alpha - beta * x[i]).powi(2))
        .sum();
    // weights are rescaled to average one so the variance estimate keeps
    // the unweighted units
    let s2 = sse / (sw / n) / (n - 2.0);
    let beta_se = (s2 / (sxx / (sw / n))).sqrt();
    let alpha_se = (s2 * (1.0 / n + xm * xm / (sxx / (sw / n)))).sqrt();
    (alpha, beta, alpha_se, beta_se, sse)
}

fn finish(
    y: &[f64],
    x: &[f64],
    fit: (f64, f64, f64, f64),
    method: RegressionMethod,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> RegressionResult {
    let (alpha, beta, alpha_se, beta_se) = fit;
    let n = y.len();
    let nf = n as f64;
    let ym = linalg::mean(y);
    let sst: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let sse: f64 = y.iter().zip(x).map(|(yi, xi)| (yi - alpha - beta * xi).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else if sse == 0.0 { 1.0 } else { 0.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - 2.0);
    let df = nf - 2.0;
    let t = |est: f64, se: f64| {
        if se > 0.0 {
            est / se
        } else if est == 0.0 {
            0.0
        } else {
            est.signum() * f64::INFINITY
        }
    };
    RegressionResult {
        alpha,
        beta,
        alpha_se,
        beta_se,
        alpha_p: p_value(t(alpha, alpha_se), df),
        beta_p: p_value(t(beta, beta_se), df),
        r2,
        adj_r2,
        n,
        method,
        weights,
        iterations,
        converged,
    }
}

pub fn ols(y: &[f64], x: &[f64]) -> Result<RegressionResult> {
    check_pair(y, x)?;
    let w = vec![1.0; y.len()];
    let (a, b, sa, sb, _) = wls(y, x, &w);
    Ok(finish(y, x, (a, b, sa, sb), RegressionMethod::Ols, Vec::new(), 1, true))
}

pub const BISQUARE_TUNING: f64 = 4.685;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub tuning: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tuning: BISQUARE_TUNING,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Tukey-bisquare IRLS started from OLS; residual scale is the MAD of the
/// current residuals over 0.6745.
pub fn robust_regress(y: &[f64], x: &[f64], opts: &IrlsOptions) -> Result<RegressionResult> {
    check_pair(y, x)?;
    if !(opts.tuning > 0.0) {
        return Err(Error::invalid("bisquare tuning constant must be > 0"));
    }
    let n = y.len();
    let mut w = vec![1.0; n];
    let (mut a, mut b, mut sa, mut sb, _) = wls(y, x, &w);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let res: Vec<f64> = (0..n).map(|i| y[i] - a - b * x[i]).collect();
        let mut abs: Vec<f64> = res.iter().map(|r| r.abs()).collect();
        let mad = median(&mut abs);
        let scale = mad / 0.6745;
        if scale <= f64::EPSILON * (a.abs() + b.abs()).max(1e-300) {
            // residuals (essentially) vanish: leave every weight at one
            w = vec![1.0; n];
            converged = true;
            break;
        }
        let c = opts.tuning * scale;
        for i in 0..n {
            let u = res[i] / c;
            w[i] = if u.abs() < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
        if w.iter().filter(|&&v| v > 0.0).count() < 3 {
            break;
        }
        let (na, nb, nsa, nsb, _) = wls(y, x, &w);
        let change = (na - a).abs().max((nb - b).abs());
        (a, b, sa, sb) = (na, nb, nsa, nsb);
        if change < opts.tol * (1.0 + a.abs().max(b.abs())) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("IRLS stopped after {iterations} iterations without converging");
    }
    Ok(finish(y, x, (a, b, sa, sb), RegressionMethod::RobustIrls, w, iterations, converged))
}

/// CAPM regression of `asset − rf` on `market − rf` by bisquare IRLS.
pub fn jensen_alpha(asset: &[f64], market: &[f64], rf: f64) -> Result<RegressionResult> {
    let y: Vec<f64> = asset.iter().map(|r| r - rf).collect();
    let x: Vec<f64> = market.iter().map(|r| r - rf).collect();
    robust_regress(&y, &x, &IrlsOptions::default())
}

/// Significance stars at the 0.05 / 0.01 / 0.001 levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn tail_count(n: usize, q: f64) -> usize {
    ((q * n as f64).ceil() as usize).clamp(1, n)
}

/// Empirical `(VaR, CVaR)` at level `q` on the loss scale: VaR is minus the
/// `⌈qn⌉`-th smallest return and CVaR minus the mean of the `⌈qn⌉` smallest.
pub fn var_cvar(returns: &[f64], q: f64) -> Result<(f64, f64)> {
    if returns.is_empty() {
        return Err(Error::short("VaR of an empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("tail level must lie in (0, 1), got {q}")));
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = tail_count(sorted.len(), q);
    let var = -sorted[k - 1];
    let cvar = -sorted[..k].iter().sum::<f64>() / k as f64;
    Ok((var, cvar))
}

pub fn sharpe(returns: &[f64], rf: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::short("Sharpe ratio needs n >= 2"));
    }
    let sd = linalg::std_dev(returns);
    if !(sd > 0.0) {
        return Err(Error::Undefined("Sharpe ratio with zero standard deviation".into()));
    }
    Ok((linalg::mean(returns) - rf) / sd)
}

pub fn sortino(returns: &[f64], target: f64) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::short("Sortino ratio needs n >= 2"));
    }
    let n = returns.len() as f64;
    let dd = (returns.iter().map(|r| (r - target).min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    if !(dd > 0.0) {
        return Err(Error::Undefined("Sortino ratio: no observation below target".into()));
    }
    Ok((linalg::mean(returns) - target) / dd)
}

/// Expected tail gain of the best `alpha_tail` fraction of excess returns
/// over the expected tail loss of the worst `beta_tail` fraction.
pub fn rachev(returns: &[f64], rf: f64, alpha_tail: f64, beta_tail: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::short("Rachev ratio of an empty sample"));
    }
    for q in [alpha_tail, beta_tail] {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(format!("tail fraction must lie in (0, 1], got {q}")));
        }
    }
    let mut x: Vec<f64> = returns.iter().map(|r| r - rf).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let ka = tail_count(n, alpha_tail);
    let kb = tail_count(n, beta_tail);
    // Both tails are summed from the extreme inward, so a sample symmetric
    // about rf gives bit-identical numerator and denominator.
    let gain = x.iter().rev().take(ka).sum::<f64>() / ka as f64;
    let loss = -x.iter().take(kb).sum::<f64>() / kb as f64;
    if !(loss != 0.0) {
        return Err(Error::Undefined("Rachev ratio with zero expected tail loss".into()));
    }
    Ok(gain / loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub country: String,
    pub rf: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub rachev: Option<f64>,
    pub jensen_alpha: Option<f64>,
    pub jensen_beta: Option<f64>,
    pub jensen_alpha_p: Option<f64>,
    pub var: f64,
    pub cvar: f64,
    pub tail_level: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioOptions {
    pub rf: f64,
    pub rachev_alpha: f64,
    pub rachev_beta: f64,
    pub tail_level: f64,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            rf: 0.0,
            rachev_alpha: 0.5,
            rachev_beta: 0.5,
            tail_level: 0.05,
        }
    }
}

/// All ratios for one series; undefined ratios come back as `None`.
pub fn ratio_report(country: &str, returns: &[f64], market: Option<&[f64]>, opts: &RatioOptions) -> Result<RatioReport> {
    let (var, cvar) = var_cvar(returns, opts.tail_level)?;
    let jensen = match market {
        Some(m) => jensen_alpha(returns, m, opts.rf).ok(),
        None => None,
    };
    Ok(RatioReport {
        country: country.to_string(),
        rf: opts.rf,
        sharpe: sharpe(returns, opts.rf).ok(),
        sortino: sortino(returns, opts.rf).ok(),
        rachev: rachev(returns, opts.rf, opts.rachev_alpha, opts.rachev_beta).ok(),
        jensen_alpha: jensen.as_ref().map(|j| j.alpha),
        jensen_beta: jensen.as_ref().map(|j| j.beta),
        jensen_alpha_p: jensen.as_ref().map(|j| j.alpha_p),
        var,
        cvar,
        tail_level: opts.tail_level,
    })
}
