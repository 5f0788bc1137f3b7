//! Exponential price map `f(x) = a·e^{bx}` pinned so the smallest DEI in
//! scope maps to `eps_min` and the largest to 1, and log returns of the
//! mapped levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSeries;

pub const DEFAULT_EPS_MIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    /// May underflow to 0 for wide level ranges; `ln_a` is what the map uses.
    pub a: f64,
    pub ln_a: f64,
    pub b: f64,
    pub eps_min: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformScope {
    PerCountry,
    #[default]
    Pooled,
}

impl TransformParams {
    pub fn new(ln_a: f64, b: f64, eps_min: f64) -> Self {
        Self { a: ln_a.exp(), ln_a, b, eps_min }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (self.ln_a + self.b * x).exp()
    }

    /// Level whose mapped value is `f`.
    #[inline]
    pub fn invert(&self, f: f64) -> f64 {
        (f.ln() - self.ln_a) / self.b
    }
}

/// Solve `f(min) = eps_min`, `f(max) = 1` for `(a, b)`.
pub fn fit_exponential_map(levels: &[f64], eps_min: f64) -> Result<TransformParams> {
    if !(eps_min > 0.0 && eps_min < 1.0) {
        return Err(Error::invalid(format!("eps_min must lie in (0, 1), got {eps_min}")));
    }
    let (lo, hi) = levels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(Error::invalid("levels must be finite and strictly positive"));
    }
    if !(hi > lo) {
        return Err(Error::degenerate(format!("level range is degenerate (min = max = {lo})")));
    }
    let b = (1.0 / eps_min).ln() / (hi - lo);
    // ln a = -b·max makes f(max) = 1 exact in floating point.
    Ok(TransformParams::new(-b * hi, b, eps_min))
}

/// Fit the map for each series (per-country) or once for all of them (pooled).
pub fn fit_transforms(
    series: &[IndexSeries],
    scope: TransformScope,
    eps_min: f64,
) -> Result<Vec<TransformParams>> {
    match scope {
        TransformScope::PerCountry => series
            .iter()
            .map(|s| fit_exponential_map(&s.values, eps_min))
            .collect(),
        TransformScope::Pooled => {
            let all: Vec<f64> = series.iter().flat_map(|s| s.values.iter().copied()).collect();
            let p = fit_exponential_map(&all, eps_min)?;
            Ok(vec![p; series.len()])
        }
    }
}

/// Yearly log returns of a mapped series; `first_year` is the year of the
/// first return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub country: String,
    pub first_year: i32,
    pub values: Vec<f64>,
}

/// `ln(p_t / p_{t-1})` for consecutive prices.
pub fn log_returns_from_prices(prices: &[f64]) -> Vec<f64> {
    prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

pub fn log_returns(series: &IndexSeries, p: &TransformParams) -> Result<ReturnSeries> {
    if series.values.len() < 2 {
        return Err(Error::short(format!(
            "series `{}` has {} values, need at least 2",
            series.country,
            series.values.len()
        )));
    }
    let prices: Vec<f64> = series.values.iter().map(|&x| p.apply(x)).collect();
    let values = log_returns_from_prices(&prices);
    if let Some(bad) = values.iter().position(|r| !r.is_finite()) {
        return Err(Error::degenerate(format!(
            "non-finite return for `{}` in {}",
            series.country,
            series.first_year + 1 + bad as i32
        )));
    }
    Ok(ReturnSeries {
        country: series.country.clone(),
        first_year: series.first_year + 1,
        values,
    })
}
