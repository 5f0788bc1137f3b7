//! Joint one-step-ahead scenarios with multivariate NIG innovations.
//!
//! All margins share one inverse-Gaussian subordinator `W` (mean 1, shape
//! `ζ̄`). Margin `i` with scale ratio `s_i = δ_i/γ_i` is
//! `X_i = μ_i + β_i s_i W + √(s_i W) Y_i`, `Y ~ N(0, R)`. The mean of every
//! margin is exact, and so is the whole law when `δ_iγ_i = ζ̄`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econometrics::nig::{fit_nig, sample_inverse_gaussian};
use crate::econometrics::{FittedModel, NigParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, Domain, BLOCK};
use crate::transform::TransformParams;

pub const DEFAULT_SCENARIOS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    #[default]
    RealWorld,
    RiskNeutral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvNigSpec {
    pub countries: Vec<String>,
    pub marginals: Vec<NigParams>,
    /// Shape of the common subordinator (geometric mean of `δ_iγ_i`).
    pub zeta: f64,
    /// Row-major `L × L` mixing correlation.
    pub correlation: Vec<f64>,
    /// True when the residual correlation had to be projected onto the PSD
    /// cone.
    pub repaired: bool,
    /// Margins whose residual fit failed and that carry the innovation law
    /// of the country's fitted model instead.
    #[serde(default)]
    pub fallback: Vec<String>,
}

impl MvNigSpec {
    pub fn new(countries: Vec<String>, marginals: Vec<NigParams>, correlation: DMatrix<f64>) -> Result<Self> {
        let l = marginals.len();
        if countries.len() != l || correlation.nrows() != l || correlation.ncols() != l {
            return Err(Error::Mismatch(format!(
                "{} countries, {} marginals, {}x{} correlation",
                countries.len(),
                l,
                correlation.nrows(),
                correlation.ncols()
            )));
        }
        if l == 0 {
            return Err(Error::short("multivariate NIG needs at least one margin"));
        }
        for m in &marginals {
            m.validate()?;
        }
        let (correlation, repaired) = linalg::nearest_correlation(&correlation);
        let zeta = (marginals.iter().map(|m| (m.delta * m.gamma()).ln()).sum::<f64>() / l as f64).exp();
        Ok(Self {
            countries,
            marginals,
            zeta,
            correlation: correlation.as_slice().to_vec(),
            repaired,
            fallback: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let l = self.dim();
        DMatrix::from_column_slice(l, l, &self.correlation)
    }

    fn scale_ratios(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.delta / m.gamma()).collect()
    }

    /// Closed-form `(mean, variance)` of each mixed margin.
    pub fn margin_moments(&self) -> Vec<(f64, f64)> {
        self.marginals
            .iter()
            .zip(self.scale_ratios())
            .map(|(m, s)| {
                let mean = m.mu + m.beta * s;
                let var = s + m.beta * m.beta * s * s / self.zeta;
                (mean, var)
            })
            .collect()
    }
}

/// Marginal NIG fits per column plus the projected residual correlation.
pub fn fit_mvnig(residuals: &DMatrix<f64>, countries: Vec<String>) -> Result<MvNigSpec> {
    fit_mvnig_with_fallback(residuals, countries, &[])
}

/// [`fit_mvnig`], except that a column whose NIG fit fails takes
/// `fallback[j]` when one is given. Short samples from a spiky innovation
/// law often have no interior maximum; the law the volatility model was
/// estimated with is the natural stand-in. Substituted columns are listed in
/// [`MvNigSpec::fallback`].
pub fn fit_mvnig_with_fallback(
    residuals: &DMatrix<f64>,
    countries: Vec<String>,
    fallback: &[Option<NigParams>],
) -> Result<MvNigSpec> {
    let (n, l) = residuals.shape();
    if countries.len() != l {
        return Err(Error::Mismatch(format!("{} countries for {l} residual columns", countries.len())));
    }
    if n < l {
        return Err(Error::short(format!("{n} residual rows for {l} columns")));
    }
    let fits = (0..l)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = residuals.column(j).iter().copied().collect();
            match (fit_nig(&col), fallback.get(j).copied().flatten()) {
                (Ok(f), _) => Ok((f.params, false)),
                (Err(_), Some(p)) => Ok((p, true)),
                (Err(Error::Degenerate(m)), None) => Err(Error::Degenerate(format!("{}: {m}", countries[j]))),
                (Err(e), None) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let corr = if l == 1 {
        DMatrix::identity(1, 1)
    } else {
        linalg::correlation(residuals)
    };
    let substituted = fits
        .iter()
        .zip(&countries)
        .filter(|((_, sub), _)| *sub)
        .map(|(_, c)| c.clone())
        .collect();
    let mut spec = MvNigSpec::new(countries, fits.into_iter().map(|(p, _)| p).collect(), corr)?;
    spec.fallback = substituted;
    Ok(spec)
}

/// `S × L` one-period log returns.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioMatrix {
    pub countries: Vec<String>,
    pub returns: DMatrix<f64>,
    pub measure: Measure,
    pub seed: u64,
}

impl ScenarioMatrix {
    pub fn n_scenarios(&self) -> usize {
        self.returns.nrows()
    }

    pub fn summary(&self) -> ScenarioSummary {
        let l = self.returns.ncols();
        let means = (0..l).map(|j| self.returns.column(j).mean()).collect();
        let variances = (0..l)
            .map(|j| linalg::variance(self.returns.column(j).as_slice()))
            .collect();
        let corr = linalg::correlation(&self.returns);
        ScenarioSummary {
            countries: self.countries.clone(),
            scenarios: self.n_scenarios(),
            measure: self.measure,
            seed: self.seed,
            means,
            variances,
            correlation: (0..l).map(|i| corr.row(i).iter().copied().collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub countries: Vec<String>,
    pub scenarios: usize,
    pub measure: Measure,
    pub seed: u64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
}

/// `S` joint draws of the standardized innovation vector (each margin has
/// mean 0 and variance 1 exactly in law).
pub fn sample_innovations(spec: &MvNigSpec, s: usize, seed: u64) -> DMatrix<f64> {
    let l = spec.dim();
    let root = linalg::psd_sqrt(&spec.correlation_matrix());
    let ratios = spec.scale_ratios();
    let moments = spec.margin_moments();
    let blocks = s.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, Domain::Scenarios, b as u64);
            let rows = BLOCK.min(s - b * BLOCK);
            let mut out = Vec::with_capacity(rows * l);
            let mut z = DVector::zeros(l);
            for _ in 0..rows {
                let w = sample_inverse_gaussian(&mut rng, 1.0, spec.zeta);
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let y = &root * &z;
                for i in 0..l {
                    let m = &spec.marginals[i];
                    let sw = ratios[i] * w;
                    let x = m.mu + m.beta * sw + sw.sqrt() * y[i];
                    let (mean, var) = moments[i];
                    out.push((x - mean) / var.sqrt());
                }
            }
            out
        })
        .collect();
    let flat = chunks.concat();
    DMatrix::from_row_slice(s, l, &flat)
}

/// Push joint innovations through each country's fitted recursion one step
/// ahead: `R_i = m_i + σ_i ε_i` with the model's conditional mean and
/// variance for the next period.
pub fn sample_scenarios(spec: &MvNigSpec, models: &[FittedModel], s: usize, seed: u64) -> Result<ScenarioMatrix> {
    if models.len() != spec.dim() {
        return Err(Error::Mismatch(format!("{} models for {} margins", models.len(), spec.dim())));
    }
    if s == 0 {
        return Err(Error::invalid("scenario count must be >= 1"));
    }
    let mut eps = sample_innovations(spec, s, seed);
    for (j, model) in models.iter().enumerate() {
        let m = model.next_mean();
        let sd = model.next_variance().sqrt();
        for v in eps.column_mut(j).iter_mut() {
            *v = m + sd * *v;
        }
    }
    Ok(ScenarioMatrix {
        countries: spec.countries.clone(),
        returns: eps,
        measure: Measure::RealWorld,
        seed,
    })
}

/// Next-period DEI levels per scenario: the mapped level is multiplied by
/// `e^R` and pulled back through the inverse map.
pub fn forward_levels(
    last_levels: &[f64],
    scenarios: &ScenarioMatrix,
    params: &[TransformParams],
) -> Result<DMatrix<f64>> {
    let l = scenarios.returns.ncols();
    if last_levels.len() != l || params.len() != l {
        return Err(Error::Mismatch(format!(
            "{} levels, {} transforms, {} scenario columns",
            last_levels.len(),
            params.len(),
            l
        )));
    }
    let mut out = scenarios.returns.clone();
    for j in 0..l {
        let p = &params[j];
        let f0 = p.apply(last_levels[j]);
        for v in out.column_mut(j).iter_mut() {
            *v = p.invert(f0 * v.exp());
        }
    }
    Ok(out)
}
