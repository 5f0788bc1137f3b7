//! Conditional mean plus ARCH(1) / GARCH(1,1) / EGARCH(1,1) volatility,
//! estimated by conditional maximum likelihood under Gaussian or
//! standardized-NIG innovations.
//!
//! The mean equation is `R_t = φ0 + z_t + θ1 z_{t-1}` with `z_t = σ_t ε_t`;
//! [`MeanForm::Ar1`] swaps the lagged innovation for the lagged return.
//! Every recursion starts at `σ²_1` = sample variance and `z_0 = 0`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nig::NigParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{bfgs, central_gradient, newton_polish, BfgsOptions};
use crate::rng::{substream, Domain};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanForm {
    /// Constant plus one lagged innovation.
    #[default]
    Ma1,
    /// Constant plus one lagged return; `theta1` is then the AR coefficient.
    Ar1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub form: MeanForm,
    pub phi0: f64,
    pub theta1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VolFamily {
    #[serde(rename = "ARCH1")]
    Arch1,
    #[serde(rename = "GARCH11")]
    Garch11,
    #[serde(rename = "EGARCH11")]
    Egarch11,
}

impl VolFamily {
    pub const ALL: [VolFamily; 3] = [VolFamily::Arch1, VolFamily::Garch11, VolFamily::Egarch11];

    pub fn n_params(self) -> usize {
        match self {
            VolFamily::Arch1 => 2,
            VolFamily::Garch11 => 3,
            VolFamily::Egarch11 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VolFamily::Arch1 => "ARCH1",
            VolFamily::Garch11 => "GARCH11",
            VolFamily::Egarch11 => "EGARCH11",
        }
    }
}

impl std::str::FromStr for VolFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['-', '_', '(', ')', ','], "").as_str() {
            "ARCH1" | "ARCH" => Ok(VolFamily::Arch1),
            "GARCH11" | "GARCH" => Ok(VolFamily::Garch11),
            "EGARCH11" | "EGARCH" => Ok(VolFamily::Egarch11),
            _ => Err(Error::invalid(format!("unknown volatility family `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum VolSpec {
    #[serde(rename = "ARCH1")]
    Arch1 { alpha0: f64, alpha1: f64 },
    #[serde(rename = "GARCH11")]
    Garch11 { alpha0: f64, alpha1: f64, beta1: f64 },
    /// `ln σ²_t = ω + β ln σ²_{t-1} + α(|ε_{t-1}| − E|ε|) + γ ε_{t-1}`
    #[serde(rename = "EGARCH11")]
    Egarch11 { omega: f64, alpha: f64, gamma: f64, beta: f64 },
}

impl VolSpec {
    pub fn family(&self) -> VolFamily {
        match self {
            VolSpec::Arch1 { .. } => VolFamily::Arch1,
            VolSpec::Garch11 { .. } => VolFamily::Garch11,
            VolSpec::Egarch11 { .. } => VolFamily::Egarch11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            VolSpec::Arch1 { alpha0, alpha1 } => alpha0 > 0.0 && (0.0..1.0).contains(&alpha1),
            VolSpec::Garch11 { alpha0, alpha1, beta1 } => {
                alpha0 > 0.0 && alpha1 >= 0.0 && beta1 >= 0.0 && alpha1 + beta1 < 1.0
            }
            VolSpec::Egarch11 { omega, alpha, gamma, beta } => {
                omega.is_finite() && alpha.is_finite() && gamma.is_finite() && beta.abs() < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("volatility parameters outside their constraints: {self:?}")))
        }
    }

    /// `σ²_t` from the previous variance and previous innovation `z = σ ε`.
    #[inline]
    pub fn step(&self, sigma2_prev: f64, z_prev: f64, abs_moment: f64) -> f64 {
        match *self {
            VolSpec::Arch1 { alpha0, alpha1 } => alpha0 + alpha1 * z_prev * z_prev,
            VolSpec::Garch11 { alpha0, alpha1, beta1 } => alpha0 + alpha1 * z_prev * z_prev + beta1 * sigma2_prev,
            VolSpec::Egarch11 { omega, alpha, gamma, beta } => {
                let e = z_prev / sigma2_prev.sqrt();
                (omega + beta * sigma2_prev.ln() + alpha * (e.abs() - abs_moment) + gamma * e).exp()
            }
        }
    }

    /// Long-run variance (for EGARCH, the variance at the log-variance fixed
    /// point, used only to seed simulations).
    pub fn unconditional_variance(&self) -> f64 {
        match *self {
            VolSpec::Arch1 { alpha0, alpha1 } => alpha0 / (1.0 - alpha1),
            VolSpec::Garch11 { alpha0, alpha1, beta1 } => alpha0 / (1.0 - alpha1 - beta1),
            VolSpec::Egarch11 { omega, beta, .. } => (omega / (1.0 - beta)).exp(),
        }
    }

    fn to_vec(self) -> Vec<f64> {
        match self {
            VolSpec::Arch1 { alpha0, alpha1 } => vec![alpha0, alpha1],
            VolSpec::Garch11 { alpha0, alpha1, beta1 } => vec![alpha0, alpha1, beta1],
            VolSpec::Egarch11 { omega, alpha, gamma, beta } => vec![omega, alpha, gamma, beta],
        }
    }

    fn from_slice(family: VolFamily, p: &[f64]) -> Self {
        match family {
            VolFamily::Arch1 => VolSpec::Arch1 { alpha0: p[0], alpha1: p[1] },
            VolFamily::Garch11 => VolSpec::Garch11 { alpha0: p[0], alpha1: p[1], beta1: p[2] },
            VolFamily::Egarch11 => VolSpec::Egarch11 { omega: p[0], alpha: p[1], gamma: p[2], beta: p[3] },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationKind {
    #[default]
    Normal,
    Nig,
}

/// Law of the standardized innovation `ε_t` (zero mean, unit variance).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Innovation {
    Normal,
    Nig(NigParams),
}

impl Innovation {
    pub fn kind(&self) -> InnovationKind {
        match self {
            Innovation::Normal => InnovationKind::Normal,
            Innovation::Nig(_) => InnovationKind::Nig,
        }
    }

    pub fn ln_pdf(&self, e: f64) -> f64 {
        match self {
            Innovation::Normal => -0.5 * (2.0 * PI).ln() - 0.5 * e * e,
            Innovation::Nig(p) => p.ln_pdf(e),
        }
    }

    /// `E|ε|`.
    pub fn abs_moment(&self) -> f64 {
        match self {
            Innovation::Normal => (2.0 / PI).sqrt(),
            Innovation::Nig(p) => p.mean_abs_deviation(0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovation::Normal => rng.sample(StandardNormal),
            Innovation::Nig(p) => p.sample(rng),
        }
    }

    fn extra_params(kind: InnovationKind) -> usize {
        match kind {
            InnovationKind::Normal => 0,
            InnovationKind::Nig => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mean_form: MeanForm,
    pub innovation: InnovationKind,
    /// Perturbed restarts on top of the moment-based start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mean_form: MeanForm::Ma1,
            innovation: InnovationKind::Normal,
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub mean: MeanSpec,
    pub vol: VolSpec,
    pub innovation: Innovation,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    /// Free-parameter count used in the criteria.
    pub k: usize,
    pub n: usize,
    /// Standardized innovations `ε̂_t = ẑ_t / σ̂_t`.
    pub residuals: Vec<f64>,
    /// Filtered conditional variances `σ̂²_1 … σ̂²_n`.
    pub variances: Vec<f64>,
    pub last_variance: f64,
    pub last_innovation: f64,
    pub last_return: f64,
    /// `E|ε|` under the fitted innovation law.
    pub abs_moment: f64,
    /// Largest finite-difference log-likelihood gradient component over the
    /// parameters not sitting on a constraint boundary.
    pub gradient_max: f64,
    /// Parameters (natural coordinates, in `params()` order) on a boundary.
    pub at_bound: Vec<bool>,
    pub seed: u64,
}

impl FittedModel {
    pub fn family(&self) -> VolFamily {
        self.vol.family()
    }

    /// One-step-ahead conditional variance `σ²_{n+1}`.
    pub fn next_variance(&self) -> f64 {
        self.vol.step(self.last_variance, self.last_innovation, self.abs_moment)
    }

    /// One-step-ahead conditional mean.
    pub fn next_mean(&self) -> f64 {
        match self.mean.form {
            MeanForm::Ma1 => self.mean.phi0 + self.mean.theta1 * self.last_innovation,
            MeanForm::Ar1 => self.mean.phi0 + self.mean.theta1 * self.last_return,
        }
    }

    /// Natural-coordinate parameter vector: mean, volatility, then NIG shape.
    pub fn params(&self) -> Vec<f64> {
        let mut p = vec![self.mean.phi0, self.mean.theta1];
        p.extend(self.vol.to_vec());
        if let Innovation::Nig(nig) = self.innovation {
            p.push(nig.alpha);
            p.push(nig.beta);
        }
        p
    }
}

/// `(AIC, BIC)` for log-likelihood `ll`, `k` parameters and `n` observations.
pub fn information_criteria(ll: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (2.0 * k - 2.0 * ll, k * (n as f64).ln() - 2.0 * ll)
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    family: VolFamily,
    form: MeanForm,
    innovation: InnovationKind,
}

struct Filtered {
    ll: f64,
    residuals: Vec<f64>,
    variances: Vec<f64>,
    last_z: f64,
}

impl Layout {
    fn dim(&self) -> usize {
        2 + self.family.n_params() + Innovation::extra_params(self.innovation)
    }

    /// Parameters with a bounded natural domain are mapped through smooth
    /// bijections so the optimizer runs unconstrained.
    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let mut p = vec![u[0], u[1].tanh()];
        let v = &u[2..];
        match self.family {
            VolFamily::Arch1 => {
                p.push(v[0].exp());
                p.push(logistic(v[1]));
            }
            VolFamily::Garch11 => {
                p.push(v[0].exp());
                let m = v[1].max(v[2]).max(0.0);
                let (e1, e2, e0) = ((v[1] - m).exp(), (v[2] - m).exp(), (-m).exp());
                let s = e0 + e1 + e2;
                p.push(e1 / s);
                p.push(e2 / s);
            }
            VolFamily::Egarch11 => {
                p.extend_from_slice(&v[..3]);
                p.push(v[3].tanh());
            }
        }
        if self.innovation == InnovationKind::Nig {
            let w = &u[2 + self.family.n_params()..];
            let a = (NIG_LOG_BOUND * (w[0] / NIG_LOG_BOUND).tanh()).exp();
            p.push(a);
            p.push(a * w[1].tanh());
        }
        p
    }

    fn to_unconstrained(&self, p: &[f64]) -> Vec<f64> {
        let clamp = |x: f64| x.clamp(-1.0 + 1e-9, 1.0 - 1e-9);
        let mut u = vec![p[0], clamp(p[1]).atanh()];
        let v = &p[2..];
        match self.family {
            VolFamily::Arch1 => {
                u.push(v[0].ln());
                u.push(logit(v[1].clamp(1e-9, 1.0 - 1e-9)));
            }
            VolFamily::Garch11 => {
                u.push(v[0].ln());
                let a1 = v[1].max(1e-9);
                let b1 = v[2].max(1e-9);
                let slack = (1.0 - a1 - b1).max(1e-9);
                u.push((a1 / slack).ln());
                u.push((b1 / slack).ln());
            }
            VolFamily::Egarch11 => {
                u.extend_from_slice(&v[..3]);
                u.push(clamp(v[3]).atanh());
            }
        }
        if self.innovation == InnovationKind::Nig {
            let w = &p[2 + self.family.n_params()..];
            u.push(NIG_LOG_BOUND * clamp(w[0].ln() / NIG_LOG_BOUND).atanh());
            u.push(clamp(w[1] / w[0]).atanh());
        }
        u
    }

    fn assemble(&self, p: &[f64]) -> Option<(MeanSpec, VolSpec, Innovation)> {
        let mean = MeanSpec { form: self.form, phi0: p[0], theta1: p[1] };
        let kv = self.family.n_params();
        let vol = VolSpec::from_slice(self.family, &p[2..2 + kv]);
        if !(mean.phi0.is_finite() && mean.theta1.abs() < 1.0) || vol.validate().is_err() {
            return None;
        }
        let innovation = match self.innovation {
            InnovationKind::Normal => Innovation::Normal,
            InnovationKind::Nig => {
                let (a, b) = (p[2 + kv], p[3 + kv]);
                if !(a > 0.0 && b.abs() < a && a.is_finite()) {
                    return None;
                }
                Innovation::Nig(NigParams::standardized(a, b).ok()?)
            }
        };
        Some((mean, vol, innovation))
    }

    /// Per-coordinate flag: natural parameter within `tol` of its boundary.
    fn at_bound(&self, p: &[f64], tol: f64) -> Vec<bool> {
        let mut flags = vec![false; p.len()];
        flags[1] = 1.0 - p[1].abs() < tol;
        match self.family {
            VolFamily::Arch1 => {
                flags[2] = p[2] < tol;
                flags[3] = p[3] < tol || 1.0 - p[3] < tol;
            }
            VolFamily::Garch11 => {
                flags[2] = p[2] < tol;
                let slack = 1.0 - p[3] - p[4] < tol;
                flags[3] = p[3] < tol || slack;
                flags[4] = p[4] < tol || slack;
            }
            VolFamily::Egarch11 => {
                flags[5] = 1.0 - p[5].abs() < tol;
            }
        }
        if self.innovation == InnovationKind::Nig {
            let i = 2 + self.family.n_params();
            let (a, b) = (p[i], p[i + 1]);
            // On short samples the likelihood can keep rising toward the
            // maximally skewed edge |β| → α, where α and β only move jointly;
            // both shape coordinates then count as bound.
            let edge = a.ln() > NIG_LOG_BOUND - 0.5 || 1.0 - b.abs() / a < SKEW_EDGE.max(tol);
            flags[i] = edge;
            flags[i + 1] = edge;
        }
        flags
    }

    fn filter(&self, p: &[f64], returns: &[f64], s2: f64, rbar: f64) -> Option<Filtered> {
        let (mean, vol, innovation) = self.assemble(p)?;
        let abs_moment = match vol {
            VolSpec::Egarch11 { .. } => innovation.abs_moment(),
            _ => 0.0,
        };
        let n = returns.len();
        let mut residuals = Vec::with_capacity(n);
        let mut variances = Vec::with_capacity(n);
        let mut ll = 0.0;
        let mut sigma2 = s2;
        let mut z_prev = 0.0;
        let mut r_prev = rbar;
        for (t, &r) in returns.iter().enumerate() {
            if t > 0 {
                sigma2 = vol.step(sigma2, z_prev, abs_moment);
            }
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                return None;
            }
            let m = match mean.form {
                MeanForm::Ma1 => mean.phi0 + mean.theta1 * z_prev,
                MeanForm::Ar1 => mean.phi0 + mean.theta1 * r_prev,
            };
            let z = r - m;
            let sd = sigma2.sqrt();
            let e = z / sd;
            ll += innovation.ln_pdf(e) - 0.5 * sigma2.ln();
            residuals.push(e);
            variances.push(sigma2);
            z_prev = z;
            r_prev = r;
        }
        if !ll.is_finite() {
            return None;
        }
        Some(Filtered {
            ll,
            residuals,
            variances,
            last_z: z_prev,
        })
    }

    fn start(&self, returns: &[f64], s2: f64, rbar: f64) -> Vec<f64> {
        let mut p = vec![rbar, 0.0];
        match self.family {
            // variance targeting: intercept set so the long-run variance is s2
            VolFamily::Arch1 => p.extend([0.8 * s2, 0.2]),
            VolFamily::Garch11 => p.extend([0.1 * s2, 0.1, 0.8]),
            VolFamily::Egarch11 => p.extend([0.2 * s2.ln(), 0.1, 0.0, 0.8]),
        }
        if self.form == MeanForm::Ar1 {
            let n = returns.len();
            let num: f64 = (1..n).map(|t| (returns[t] - rbar) * (returns[t - 1] - rbar)).sum();
            let den: f64 = returns.iter().map(|r| (r - rbar).powi(2)).sum();
            let rho = (num / den).clamp(-0.9, 0.9);
            p[0] = rbar * (1.0 - rho);
            p[1] = rho;
        }
        if self.innovation == InnovationKind::Nig {
            let z: Vec<f64> = returns.iter().map(|r| (r - rbar) / s2.sqrt()).collect();
            let m = super::nig::moment_start(&z);
            // shape of the moment fit expressed on the unit-variance scale
            let c = m.variance().sqrt();
            let (a, b) = (m.alpha * c, m.beta * c);
            let a = a.clamp(0.3, 50.0);
            p.push(a);
            p.push(b.clamp(-0.8 * a, 0.8 * a));
        }
        p
    }
}

const NIG_LOG_BOUND: f64 = 14.0;
const SKEW_EDGE: f64 = 1e-4;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maximum-likelihood fit of one mean/volatility/innovation combination.
pub fn fit_model(returns: &[f64], family: VolFamily, opts: &FitOptions) -> Result<FittedModel> {
    let n = returns.len();
    if n < 8 {
        return Err(Error::short(format!("model fit needs n >= 8 returns, got {n}")));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("returns contain non-finite values"));
    }
    let rbar = linalg::mean(returns);
    let s2 = linalg::variance(returns);
    let scale = returns.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    if !(s2 > (1e-12 * scale).powi(2)) {
        return Err(Error::degenerate("returns have zero variance; the likelihood is unbounded"));
    }
    let layout = Layout {
        family,
        form: opts.mean_form,
        innovation: opts.innovation,
    };
    let nf = n as f64;
    let neg_ll = |p: &[f64]| match layout.filter(p, returns, s2, rbar) {
        Some(f) => -f.ll,
        None => f64::INFINITY,
    };
    let objective = |u: &[f64]| neg_ll(&layout.to_natural(u)) / nf;
    let gradient = |u: &[f64]| central_gradient(&objective, u, 1e-6);

    let base = layout.to_unconstrained(&layout.start(returns, s2, rbar));
    if !objective(&base).is_finite() {
        return Err(Error::invalid(format!("{} start is infeasible", family.label())));
    }
    let bfgs_opts = BfgsOptions::default();
    let mut best = bfgs(objective, gradient, &base, &bfgs_opts);
    for i in 0..opts.restarts {
        let mut rng = substream(opts.seed, Domain::OptimizerRestarts, i as u64);
        let start: Vec<f64> = base
            .iter()
            .map(|&x| x + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if !objective(&start).is_finite() {
            continue;
        }
        let m = bfgs(objective, gradient, &start, &bfgs_opts);
        let better = m.value < best.value - 1e-12 || (!best.converged && m.converged && m.value <= best.value + 1e-9);
        if m.value.is_finite() && better {
            best = m;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::NonConvergence(format!("{}: no feasible optimum", family.label())));
    }

    // Polish the interior coordinates in natural units, where the gradient
    // check is stated.
    let mut p = layout.to_natural(&best.x);
    let bound = layout.at_bound(&p, 1e-6);
    let free: Vec<usize> = (0..p.len()).filter(|&i| !bound[i]).collect();
    let embed = |x: &[f64], base: &[f64]| {
        let mut full = base.to_vec();
        for (j, &i) in free.iter().enumerate() {
            full[i] = x[j];
        }
        full
    };
    let mut polished = false;
    if !free.is_empty() {
        let anchor = p.clone();
        let sub = |x: &[f64]| neg_ll(&embed(x, &anchor));
        let x0: Vec<f64> = free.iter().map(|&i| p[i]).collect();
        let m = newton_polish(&sub, &x0, 1e-6, 1e-6, 30);
        if m.value.is_finite() && m.value <= neg_ll(&p) + 1e-9 {
            p = embed(&m.x, &anchor);
            polished = m.converged;
        }
    }
    let bound = layout.at_bound(&p, 1e-6);
    let grad = central_gradient(&neg_ll, &p, 1e-6);
    let gradient_max = grad
        .iter()
        .zip(&bound)
        .filter(|(_, b)| !**b)
        .fold(0.0_f64, |m, (g, _)| m.max(g.abs()));
    if !best.converged && !polished && gradient_max > 1e-3 {
        return Err(Error::NonConvergence(format!(
            "{} after {} restarts (gradient {gradient_max:e})",
            family.label(),
            opts.restarts
        )));
    }

    let (mean, vol, innovation) = layout.assemble(&p).expect("optimum is feasible");
    let f = layout.filter(&p, returns, s2, rbar).expect("optimum is feasible");
    let k = layout.dim();
    let (aic, bic) = information_criteria(f.ll, k, n);
    Ok(FittedModel {
        mean,
        vol,
        innovation,
        log_likelihood: f.ll,
        aic,
        bic,
        k,
        n,
        last_variance: *f.variances.last().unwrap(),
        residuals: f.residuals,
        variances: f.variances,
        last_innovation: f.last_z,
        last_return: returns[n - 1],
        abs_moment: innovation.abs_moment(),
        gradient_max,
        at_bound: bound,
        seed: opts.seed,
    })
}

/// Log-likelihood of `returns` at the natural parameter vector `p` (same
/// layout as [`FittedModel::params`]); `None` when `p` is infeasible.
pub fn log_likelihood_at(
    returns: &[f64],
    family: VolFamily,
    form: MeanForm,
    innovation: InnovationKind,
    p: &[f64],
) -> Option<f64> {
    let layout = Layout { family, form, innovation };
    if p.len() != layout.dim() {
        return None;
    }
    layout
        .filter(p, returns, linalg::variance(returns), linalg::mean(returns))
        .map(|f| f.ll)
}

/// Simulate `n` returns from the model, starting at the long-run variance
/// after discarding `burn` draws.
pub fn simulate_returns(
    mean: &MeanSpec,
    vol: &VolSpec,
    innovation: &Innovation,
    n: usize,
    burn: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = substream(seed, Domain::Simulation, 0);
    let abs_moment = innovation.abs_moment();
    let mut sigma2 = vol.unconditional_variance();
    let mut z_prev = 0.0;
    let mut r_prev = match mean.form {
        MeanForm::Ar1 => mean.phi0 / (1.0 - mean.theta1),
        MeanForm::Ma1 => mean.phi0,
    };
    let mut out = Vec::with_capacity(n);
    for t in 0..n + burn {
        if t > 0 {
            sigma2 = vol.step(sigma2, z_prev, abs_moment);
        }
        let m = match mean.form {
            MeanForm::Ma1 => mean.phi0 + mean.theta1 * z_prev,
            MeanForm::Ar1 => mean.phi0 + mean.theta1 * r_prev,
        };
        let z = sigma2.sqrt() * innovation.sample(&mut rng);
        let r = m + z;
        if t >= burn {
            out.push(r);
        }
        z_prev = z;
        r_prev = r;
    }
    out
}
