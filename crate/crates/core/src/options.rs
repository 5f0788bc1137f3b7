//! Monte Carlo pricing of European options on a GARCH(1,1)-NIG index under
//! the Esscher-transformed measure, and Black–Scholes implied volatilities.
//!
//! Given the conditional variance `a_t`, the one-period return is
//! `R_t = r'_t + m_t + √a_t·ε_t` with `m_t = λ₀√a_t − a_t/2` and `ε_t` NIG.
//! Under `Q` the skew of `ε_t` becomes `β + √a_t·θ_t`, where `θ_t` makes the
//! discounted level a martingale.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econometrics::nig::inverse_gaussian_from;
use crate::econometrics::{FittedModel, Innovation, NigParams, VolSpec};
use crate::error::{Error, Result};
use crate::optim::brent_root;
use crate::rng::{substream, Domain, BLOCK};
use crate::special::norm_cdf;

pub const DEFAULT_PATHS: usize = 10_000;

/// GARCH(1,1) recursion with NIG innovations, as used for pricing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingModel {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Innovation law under the real-world measure.
    pub nig: NigParams,
    /// Risk-premium constant in `m_t`.
    pub lambda0: f64,
    /// Conditional variance of the first simulated period.
    pub a1: f64,
}

impl PricingModel {
    /// Requires a GARCH11 fit with NIG innovations; `a1` is its one-step
    /// forecast.
    pub fn from_fitted(model: &FittedModel, lambda0: f64) -> Result<Self> {
        let VolSpec::Garch11 { alpha0, alpha1, beta1 } = model.vol else {
            return Err(Error::invalid(format!(
                "option pricing needs a GARCH11 model, got {}",
                model.family().label()
            )));
        };
        let Innovation::Nig(nig) = model.innovation else {
            return Err(Error::invalid("option pricing needs NIG innovations"));
        };
        let m = Self { alpha0, alpha1, beta1, nig, lambda0, a1: model.next_variance() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.nig.validate()?;
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.alpha0) && ok(self.alpha1) && ok(self.beta1) && ok(self.a1) && self.lambda0.is_finite()) {
            return Err(Error::invalid(format!(
                "pricing recursion needs nonnegative finite coefficients, got α0 = {}, α1 = {}, β1 = {}, a1 = {}",
                self.alpha0, self.alpha1, self.beta1, self.a1
            )));
        }
        Ok(())
    }

    /// `ln E_P[e^{uR}]` given the conditional variance `a` and rate `r`.
    pub fn conditional_ln_mgf(&self, u: f64, a: f64, r: f64) -> Result<f64> {
        let sa = a.sqrt();
        let m = self.lambda0 * sa - 0.5 * a;
        Ok(u * (r + m) + self.nig.ln_mgf(u * sa)?)
    }
}

/// Esscher parameter `θ` solving `MGF(1+θ) = MGF(θ)·e^{r}` for the
/// conditional law with variance `a = σ²`.
pub fn esscher_shift(model: &PricingModel, sigma: f64, r: f64) -> Result<f64> {
    let a = sigma * sigma;
    if a == 0.0 {
        // deterministic return: any θ works, take the neutral one
        return Ok(0.0);
    }
    let NigParams { alpha, beta, delta, mu } = model.nig;
    let sa = sigma;
    // Both u = θ√a and (1+θ)√a must stay inside (−α−β, α−β).
    let lo = (-alpha - beta) / sa;
    let hi = (alpha - beta) / sa - 1.0;
    if !(hi > lo) {
        return Err(Error::NoRoot(format!(
            "MGF domain too narrow for σ = {sigma:e} (needs 2α > σ, α = {alpha})"
        )));
    }
    let m = model.lambda0 * sa - 0.5 * a;
    let g = |theta: f64| {
        let x0 = beta + theta * sa;
        let x1 = x0 + sa;
        let root = |x: f64| (alpha * alpha - x * x).max(0.0).sqrt();
        m + mu * sa + delta * (root(x0) - root(x1))
    };
    let theta = brent_root(g, lo, hi, 1e-15 * (1.0 + hi.abs().max(lo.abs())), 1e-13)
        .map_err(|e| Error::NoRoot(format!("Esscher equation at σ = {sigma:e}, r' = {r}: {e}")))?;
    if g(theta).abs() >= 1e-10 {
        return Err(Error::NoRoot(format!("Esscher residual {:e} at σ = {sigma:e}", g(theta))));
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingJob {
    pub model: PricingModel,
    pub s0: f64,
    /// Per-step rates; a single entry is a flat curve.
    pub rf: Vec<f64>,
    /// Maturities in steps.
    pub maturities: Vec<usize>,
    pub strikes: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl PricingJob {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_paths == 0 {
            return Err(Error::invalid("path count must be >= 1"));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(Error::invalid("antithetic sampling needs an even path count"));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("spot must be positive, got {}", self.s0)));
        }
        if let Some(k) = self.strikes.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::invalid(format!("strikes must be positive, got {k}")));
        }
        if self.maturities.is_empty() || self.maturities.contains(&0) {
            return Err(Error::invalid("maturities must be a nonempty list of step counts >= 1"));
        }
        let horizon = self.horizon();
        if self.rf.is_empty() || (self.rf.len() > 1 && self.rf.len() < horizon) {
            return Err(Error::invalid(format!(
                "rate curve has {} entries for a {horizon}-step horizon",
                self.rf.len()
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.maturities.iter().copied().max().unwrap_or(0)
    }

    /// Rate of step `t` (0-based).
    pub fn rate(&self, t: usize) -> f64 {
        if self.rf.len() == 1 {
            self.rf[0]
        } else {
            self.rf[t]
        }
    }

    /// `Σ_{t<T} r'_t`.
    pub fn cumulative_rate(&self, steps: usize) -> f64 {
        (0..steps).map(|t| self.rate(t)).sum()
    }
}

/// `N × |T|` levels; column `j` holds the level at `maturities[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalLevels {
    pub maturities: Vec<usize>,
    pub n_paths: usize,
    /// Row-major.
    pub levels: Vec<f64>,
}

impl TerminalLevels {
    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.maturities.len();
        (0..self.n_paths).map(move |i| self.levels[i * w + j])
    }
}

/// Simulate the index under `Q`. Paths come in blocks of [`BLOCK`] with one
/// substream each. With `antithetic`, paths `2i` and `2i+1` reuse the same
/// subordinator uniforms and opposite Gaussian draws.
pub fn simulate_risk_neutral(job: &PricingJob) -> Result<TerminalLevels> {
    job.validate()?;
    let horizon = job.horizon();
    let width = job.maturities.len();
    let mut record: Vec<Vec<usize>> = vec![Vec::new(); horizon];
    for (j, &m) in job.maturities.iter().enumerate() {
        record[m - 1].push(j);
    }
    let pm = &job.model;
    let NigParams { alpha, beta, delta, mu } = pm.nig;
    let group = if job.antithetic { 2 } else { 1 };
    let blocks = job.n_paths.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let mut rng = substream(job.seed, Domain::PricePaths, b as u64);
            let rows = BLOCK.min(job.n_paths - b * BLOCK);
            let mut out = vec![0.0; rows * width];
            for first in (0..rows).step_by(group) {
                let mut a = [pm.a1; 2];
                let mut log_level = [job.s0.ln(); 2];
                for t in 0..horizon {
                    let r = job.rate(t);
                    let nu: f64 = rng.sample(StandardNormal);
                    let u: f64 = rng.random();
                    let z: f64 = rng.sample(StandardNormal);
                    for g in 0..group {
                        let at = a[g];
                        if at == 0.0 {
                            log_level[g] += r;
                            a[g] = pm.alpha0;
                            continue;
                        }
                        let sa = at.sqrt();
                        let theta = esscher_shift(pm, sa, r)?;
                        let bq = beta + sa * theta;
                        let gq = (alpha * alpha - bq * bq).sqrt();
                        let w = inverse_gaussian_from(nu, u, delta / gq, delta * delta);
                        let zg = if g == 0 { z } else { -z };
                        let eps = mu + bq * w + w.sqrt() * zg;
                        log_level[g] += r + pm.lambda0 * sa - 0.5 * at + sa * eps;
                        a[g] = pm.alpha0 + pm.alpha1 * at * eps * eps + pm.beta1 * at;
                    }
                    for &j in &record[t] {
                        for g in 0..group {
                            out[(first + g) * width + j] = log_level[g].exp();
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TerminalLevels {
        maturities: job.maturities.clone(),
        n_paths: job.n_paths,
        levels: chunks.concat(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Call,
    Put,
}

/// Black–Scholes price with maturity `t` (in rate periods) and continuously
/// compounded rate `r`.
pub fn black_scholes(s0: f64, k: f64, t: f64, r: f64, sigma: f64, side: Side) -> f64 {
    let disc_k = k * (-r * t).exp();
    let sd = sigma * t.sqrt();
    if sd == 0.0 {
        return match side {
            Side::Call => (s0 - disc_k).max(0.0),
            Side::Put => (disc_k - s0).max(0.0),
        };
    }
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    let d2 = d1 - sd;
    match side {
        Side::Call => s0 * norm_cdf(d1) - disc_k * norm_cdf(d2),
        Side::Put => disc_k * norm_cdf(-d2) - s0 * norm_cdf(-d1),
    }
}

pub const IV_LOWER: f64 = 1e-6;
pub const IV_UPPER: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "sigma", rename_all = "kebab-case")]
pub enum ImpliedVol {
    Value(f64),
    /// Price at or above the value at the upper bracket.
    AtUpper,
    /// Price at or below the value at the lower bracket.
    AtLower,
    /// Price outside the no-arbitrage band.
    Undefined,
}

impl ImpliedVol {
    pub fn value(&self) -> Option<f64> {
        match self {
            ImpliedVol::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ImpliedVol::Value(v) => format!("{v}"),
            ImpliedVol::AtUpper => "upper".into(),
            ImpliedVol::AtLower => "lower".into(),
            ImpliedVol::Undefined => "NA".into(),
        }
    }
}

/// Invert [`black_scholes`] on `σ ∈ [1e-6, 5]`, converged in `σ` rather
/// than in price so that low-vega cells still round-trip.
pub fn implied_vol(price: f64, s0: f64, k: f64, t: f64, r: f64, side: Side) -> ImpliedVol {
    let disc_k = k * (-r * t).exp();
    let (lo_band, hi_band) = match side {
        Side::Call => ((s0 - disc_k).max(0.0), s0),
        Side::Put => ((disc_k - s0).max(0.0), disc_k),
    };
    if !price.is_finite() || price < lo_band || price > hi_band {
        return ImpliedVol::Undefined;
    }
    let f = |s: f64| black_scholes(s0, k, t, r, s, side) - price;
    if f(IV_UPPER) <= 0.0 {
        return ImpliedVol::AtUpper;
    }
    if f(IV_LOWER) >= 0.0 {
        return ImpliedVol::AtLower;
    }
    match brent_root(f, IV_LOWER, IV_UPPER, 1e-14, 0.0) {
        Ok(s) => ImpliedVol::Value(s),
        Err(_) => ImpliedVol::Undefined,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionCell {
    pub maturity: usize,
    pub strike: f64,
    /// `S₀/K`.
    pub moneyness: f64,
    pub call: f64,
    pub put: f64,
    pub call_se: f64,
    pub put_se: f64,
    /// From the call price.
    pub implied_vol: ImpliedVol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionSurface {
    pub s0: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Maturity-major, strikes in job order.
    pub cells: Vec<OptionCell>,
}

impl OptionSurface {
    pub fn cell(&self, maturity: usize, strike: f64) -> Option<&OptionCell> {
        self.cells.iter().find(|c| c.maturity == maturity && c.strike == strike)
    }
}

/// Mean and standard error; antithetic pairs are averaged first.
fn mean_se(xs: &[f64], paired: bool) -> (f64, f64) {
    let units: Vec<f64> = if paired {
        xs.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    } else {
        xs.to_vec()
    };
    let n = units.len() as f64;
    let mean = units.iter().sum::<f64>() / n;
    if units.len() < 2 {
        return (mean, 0.0);
    }
    let var = units.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Discounted Monte Carlo call and put prices for every `(T, K)` cell.
pub fn price_options(levels: &TerminalLevels, job: &PricingJob) -> Result<OptionSurface> {
    job.validate()?;
    if levels.maturities != job.maturities || levels.n_paths != job.n_paths {
        return Err(Error::Mismatch(format!(
            "levels for {} paths at {:?}, job has {} paths at {:?}",
            levels.n_paths, levels.maturities, job.n_paths, job.maturities
        )));
    }
    let mut cells = Vec::with_capacity(job.maturities.len() * job.strikes.len());
    for (j, &t) in job.maturities.iter().enumerate() {
        let cum = job.cumulative_rate(t);
        let disc = (-cum).exp();
        let st: Vec<f64> = levels.column(j).collect();
        for &k in &job.strikes {
            let calls: Vec<f64> = st.iter().map(|s| (s - k).max(0.0)).collect();
            let puts: Vec<f64> = st.iter().map(|s| (k - s).max(0.0)).collect();
            let (c, c_se) = mean_se(&calls, job.antithetic);
            let (p, p_se) = mean_se(&puts, job.antithetic);
            let call = disc * c;
            cells.push(OptionCell {
                maturity: t,
                strike: k,
                moneyness: job.s0 / k,
                call,
                put: disc * p,
                call_se: disc * c_se,
                put_se: disc * p_se,
                implied_vol: implied_vol(call, job.s0, k, t as f64, cum / t as f64, Side::Call),
            });
        }
    }
    Ok(OptionSurface { s0: job.s0, n_paths: job.n_paths, seed: job.seed, cells })
}
