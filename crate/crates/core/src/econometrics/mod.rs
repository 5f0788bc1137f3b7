//! Volatility models, information criteria, model selection and the NIG
//! innovation law.

pub mod garch;
pub mod nig;

use serde::{Deserialize, Serialize};

pub use garch::{
    fit_model, information_criteria, log_likelihood_at, simulate_returns, FitOptions, FittedModel, Innovation,
    InnovationKind, MeanForm, MeanSpec, VolFamily, VolSpec,
};
pub use nig::{fit_nig, sample_nig, NigFit, NigParams};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    #[default]
    Bic,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::invalid(format!("unknown criterion `{s}`"))),
        }
    }
}

/// A family's score under one criterion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub family: VolFamily,
    pub k: usize,
    pub score: f64,
}

/// Lowest score wins; ties go to the smaller parameter count, then to the
/// order ARCH1 < GARCH11 < EGARCH11.
pub fn pick_family(candidates: &[Candidate]) -> Option<VolFamily> {
    candidates
        .iter()
        .filter(|c| c.score.is_finite())
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.k.cmp(&b.k))
                .then(a.family.cmp(&b.family))
        })
        .map(|c| c.family)
}

/// Outcome of fitting every family to one series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    pub family: VolFamily,
    pub model: FittedModel,
    /// Every family's fit, in [`VolFamily::ALL`] order; `None` on failure.
    pub fits: Vec<(VolFamily, Option<FittedModel>)>,
    pub warnings: Vec<String>,
}

/// One row of an AIC/BIC comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub family: VolFamily,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
}

impl Selection {
    pub fn table(&self) -> Vec<CriteriaRow> {
        self.fits
            .iter()
            .map(|(family, fit)| CriteriaRow {
                family: *family,
                aic: fit.as_ref().map(|m| m.aic),
                bic: fit.as_ref().map(|m| m.bic),
            })
            .collect()
    }
}

/// Fit all three families and keep the one minimizing `criterion`.
pub fn select_model(returns: &[f64], criterion: Criterion, opts: &FitOptions) -> Result<Selection> {
    let mut fits = Vec::with_capacity(3);
    let mut warnings = Vec::new();
    for family in VolFamily::ALL {
        match fit_model(returns, family, opts) {
            Ok(m) => fits.push((family, Some(m))),
            Err(e) => {
                log::warn!("{} fit failed: {e}", family.label());
                warnings.push(format!("{} fit failed: {e}", family.label()));
                fits.push((family, None));
            }
        }
    }
    let candidates: Vec<Candidate> = fits
        .iter()
        .filter_map(|(family, fit)| {
            fit.as_ref().map(|m| Candidate {
                family: *family,
                k: m.k,
                score: match criterion {
                    Criterion::Aic => m.aic,
                    Criterion::Bic => m.bic,
                },
            })
        })
        .collect();
    let family = pick_family(&candidates)
        .ok_or_else(|| Error::NonConvergence(format!("all three families failed: {}", warnings.join("; "))))?;
    let model = fits
        .iter()
        .find(|(f, _)| *f == family)
        .and_then(|(_, m)| m.clone())
        .expect("selected family has a fit");
    Ok(Selection {
        criterion,
        family,
        model,
        fits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands(scores: [f64; 3], ks: [usize; 3]) -> Vec<Candidate> {
        VolFamily::ALL
            .iter()
            .zip(scores.iter().zip(ks))
            .map(|(&family, (&score, k))| Candidate { family, k, score })
            .collect()
    }

    #[test]
    fn us_row_selects_arch() {
        let c = cands([18.959, 20.959, 21.29], [4, 5, 6]);
        assert_eq!(pick_family(&c), Some(VolFamily::Arch1));
    }

    #[test]
    fn ties_prefer_fewer_parameters() {
        let c = cands([5.0, 5.0, 5.0], [4, 5, 6]);
        assert_eq!(pick_family(&c), Some(VolFamily::Arch1));
        // equal k falls back to family order
        let c = cands([7.0, 5.0, 5.0], [5, 5, 5]);
        assert_eq!(pick_family(&c), Some(VolFamily::Garch11));
    }

    #[test]
    fn survivors_only() {
        let c = vec![Candidate { family: VolFamily::Egarch11, k: 6, score: 30.0 }];
        assert_eq!(pick_family(&c), Some(VolFamily::Egarch11));
        assert_eq!(pick_family(&[]), None);
    }

    #[test]
    fn criteria_gap_pins_the_sample_size() {
        // BIC - AIC = k (ln n - 2); two reference rows with k = 4 and 5 pin n
        let d1: f64 = 21.219 - 18.959;
        let d2 = 23.784 - 20.959;
        let ln_n = d2 - d1 + 2.0;
        assert!((ln_n.exp() - 13.0).abs() < 0.1);
        let (aic, bic) = information_criteria(-5.4795, 4, 13);
        assert!((aic - 18.959).abs() < 1e-3);
        assert!((bic - 21.219).abs() < 2e-3);
    }
}
