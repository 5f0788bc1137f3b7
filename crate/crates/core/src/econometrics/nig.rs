//! Normal-inverse-Gaussian law `NIG(α, β, δ, μ)`: the λ = −1/2 member of the
//! generalized hyperbolic family, written as the normal variance-mean
//! mixture `X = μ + βW + √W·Z` with `W ~ IG(δ/γ, δ²)`, `γ = √(α² − β²)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{bfgs, BfgsOptions};
use crate::rng::{substream, Domain, BLOCK};
use crate::special::{bessel_k0_over_k1, integrate_line, ln_bessel_k1, norm_cdf};

/// GH index of the NIG subfamily.
pub const LAMBDA: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mu: f64,
}

impl NigParams {
    pub fn new(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        let p = Self { alpha, beta, delta, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("NIG alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.abs() < self.alpha) {
            return Err(Error::invalid(format!(
                "NIG requires |beta| < alpha, got beta = {}, alpha = {}",
                self.beta, self.alpha
            )));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("NIG delta must be > 0, got {}", self.delta)));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("NIG mu must be finite"));
        }
        Ok(())
    }

    /// Zero-mean, unit-variance member with tail/skew shape `(alpha, beta)`.
    pub fn standardized(alpha: f64, beta: f64) -> Result<Self> {
        let gamma = (alpha * alpha - beta * beta).sqrt();
        let delta = gamma.powi(3) / (alpha * alpha);
        let mu = -delta * beta / gamma;
        Self::new(alpha, beta, delta, mu)
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        (self.alpha * self.alpha - self.beta * self.beta).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.delta * self.beta / self.gamma()
    }

    pub fn variance(&self) -> f64 {
        self.delta * self.alpha * self.alpha / self.gamma().powi(3)
    }

    pub fn skewness(&self) -> f64 {
        3.0 * self.beta / (self.alpha * (self.delta * self.gamma()).sqrt())
    }

    pub fn excess_kurtosis(&self) -> f64 {
        3.0 * (1.0 + 4.0 * self.beta * self.beta / (self.alpha * self.alpha)) / (self.delta * self.gamma())
    }

    /// Law of `c·X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            alpha: self.alpha / c,
            beta: self.beta / c,
            delta: self.delta * c,
            mu: self.mu * c,
        }
    }

    /// Law of `X + s`.
    pub fn shifted(&self, s: f64) -> Self {
        Self { mu: self.mu + s, ..*self }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mu;
        let q = (self.delta * self.delta + d * d).sqrt();
        self.alpha.ln() + self.delta.ln() - PI.ln() - q.ln()
            + ln_bessel_k1(self.alpha * q)
            + self.delta * self.gamma()
            + self.beta * d
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `P(X ≤ x)` by quadrature of the density.
    pub fn cdf(&self, x: f64) -> f64 {
        let sd = self.variance().sqrt();
        let lower = integrate_line(
            |y| if y <= x { self.pdf(y) } else { 0.0 },
            x.min(self.mean()),
            sd,
        );
        lower.clamp(0.0, 1.0)
    }

    /// Open interval of `u` on which the MGF is finite.
    pub fn mgf_domain(&self) -> (f64, f64) {
        (-self.alpha - self.beta, self.alpha - self.beta)
    }

    pub fn ln_mgf(&self, u: f64) -> Result<f64> {
        let bu = self.beta + u;
        if !(bu.abs() < self.alpha) {
            return Err(Error::invalid(format!(
                "u = {u} outside the MGF domain ({}, {})",
                -self.alpha - self.beta,
                self.alpha - self.beta
            )));
        }
        Ok(self.mu * u + self.delta * (self.gamma() - (self.alpha * self.alpha - bu * bu).sqrt()))
    }

    pub fn mgf(&self, u: f64) -> Result<f64> {
        self.ln_mgf(u).map(f64::exp)
    }

    /// `E|X − m|`. Conditional on the inverse-Gaussian mixing variable `W`,
    /// `X − m` is normal with mean `a = μ − m + βW` and variance `W`, whose
    /// absolute first moment is closed form; the remaining integral over
    /// `ln W` is smooth, unlike `|x − m|·f(x)`.
    pub fn mean_abs_deviation(&self, m: f64) -> f64 {
        let nu = self.delta / self.gamma();
        let lambda = self.delta * self.delta;
        let c = 0.5 * (lambda / (2.0 * PI)).ln();
        let abs_normal = |a: f64, w: f64| {
            let s = w.sqrt();
            s * (2.0 / PI).sqrt() * (-0.5 * a * a / w).exp() + a * (1.0 - 2.0 * norm_cdf(-a / s))
        };
        let integrand = |u: f64| {
            let w = u.exp();
            if !(w > 0.0 && w.is_finite()) {
                return 0.0;
            }
            // IG density in ln w
            let ln_f = c - 0.5 * u - lambda * (w - nu) * (w - nu) / (2.0 * nu * nu * w);
            let f = ln_f.exp();
            if f == 0.0 {
                return 0.0;
            }
            f * abs_normal(self.mu - m + self.beta * w, w)
        };
        let width = (nu / lambda).ln_1p().sqrt().clamp(1e-3, 2.0);
        integrate_line(integrand, nu.ln(), width)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let gamma = self.gamma();
        let w = sample_inverse_gaussian(rng, self.delta / gamma, self.delta * self.delta);
        let z: f64 = rng.sample(StandardNormal);
        self.mu + self.beta * w + w.sqrt() * z
    }
}

/// `IG(mean, shape)` draw by the Michael–Schucany–Haas transformation.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, shape: f64) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    inverse_gaussian_from(nu, u, mean, shape)
}

/// The Michael–Schucany–Haas map from a standard normal `nu` and a uniform
/// `u` to an `IG(mean, shape)` variate.
pub fn inverse_gaussian_from(nu: f64, u: f64, mean: f64, shape: f64) -> f64 {
    let y = nu * nu;
    let my = mean * y;
    let x = mean + mean * my / (2.0 * shape)
        - mean / (2.0 * shape) * (4.0 * mean * shape * y + my * my).sqrt();
    // The expression can cancel to a tiny negative number for huge y.
    let x = x.max(mean * 1e-300);
    if u <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    }
}

/// `n` i.i.d. draws; block `b` of [`BLOCK`] draws comes from its own
/// substream, so the output does not depend on the thread count.
pub fn sample_nig(p: &NigParams, n: usize, seed: u64) -> Vec<f64> {
    let blocks = n.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, Domain::NigSamples, b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| p.sample(&mut rng)).collect()
        })
        .collect();
    chunks.concat()
}

/// Per-observation log density and its gradient in `(α, β, δ, μ)`.
fn ln_pdf_and_grad(p: &NigParams, x: f64) -> (f64, [f64; 4]) {
    let NigParams { alpha, beta, delta, mu } = *p;
    let gamma = p.gamma();
    let d = x - mu;
    let q2 = delta * delta + d * d;
    let q = q2.sqrt();
    let z = alpha * q;
    let ll = alpha.ln() + delta.ln() - PI.ln() - q.ln() + ln_bessel_k1(z) + delta * gamma + beta * d;
    // d/dz ln K1(z) = -K0/K1 - 1/z
    let dk = -bessel_k0_over_k1(z) - 1.0 / z;
    let g_alpha = 1.0 / alpha + dk * q + delta * alpha / gamma;
    let g_beta = -delta * beta / gamma + d;
    let g_delta = 1.0 / delta - delta / q2 + dk * alpha * delta / q + gamma;
    let g_mu = d / q2 - dk * alpha * d / q - beta;
    (ll, [g_alpha, g_beta, g_delta, g_mu])
}

/// Total log-likelihood and gradient; chunked so the sum is bit-stable
/// across thread counts.
pub fn log_likelihood_and_grad(p: &NigParams, xs: &[f64]) -> (f64, [f64; 4]) {
    let parts: Vec<(f64, [f64; 4])> = xs
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut ll = 0.0;
            let mut g = [0.0; 4];
            for &x in chunk {
                let (l, gi) = ln_pdf_and_grad(p, x);
                ll += l;
                for k in 0..4 {
                    g[k] += gi[k];
                }
            }
            (ll, g)
        })
        .collect();
    let mut ll = 0.0;
    let mut g = [0.0; 4];
    for (l, gi) in parts {
        ll += l;
        for k in 0..4 {
            g[k] += gi[k];
        }
    }
    (ll, g)
}

pub fn log_likelihood(p: &NigParams, xs: &[f64]) -> f64 {
    xs.par_chunks(BLOCK)
        .map(|c| c.iter().map(|&x| p.ln_pdf(x)).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Bound on `|ln α|`, `|ln δ|` in standardized units; keeps the optimizer
/// finite when the sample is close to Gaussian (α, δ → ∞).
const LOG_BOUND: f64 = 14.0;

struct Reparam;

impl Reparam {
    fn to_params(u: &[f64]) -> NigParams {
        let alpha = (LOG_BOUND * (u[0] / LOG_BOUND).tanh()).exp();
        let r = u[1].tanh();
        let delta = (LOG_BOUND * (u[2] / LOG_BOUND).tanh()).exp();
        NigParams {
            alpha,
            beta: alpha * r,
            delta,
            mu: u[3],
        }
    }

    fn from_params(p: &NigParams) -> [f64; 4] {
        let inv = |v: f64| LOG_BOUND * (v.ln() / LOG_BOUND).clamp(-0.999_999, 0.999_999).atanh();
        [
            inv(p.alpha),
            (p.beta / p.alpha).clamp(-0.999_999, 0.999_999).atanh(),
            inv(p.delta),
            p.mu,
        ]
    }

    /// Chain rule from the natural gradient to `u`.
    fn grad(u: &[f64], g: &[f64; 4]) -> Vec<f64> {
        let p = Self::to_params(u);
        let t0 = (u[0] / LOG_BOUND).tanh();
        let dalpha = p.alpha * (1.0 - t0 * t0);
        let r = u[1].tanh();
        let t2 = (u[2] / LOG_BOUND).tanh();
        let ddelta = p.delta * (1.0 - t2 * t2);
        vec![
            (g[0] + g[1] * r) * dalpha,
            g[1] * p.alpha * (1.0 - r * r),
            g[2] * ddelta,
            g[3],
        ]
    }
}

/// Moment-matching start, projected into the feasible region.
pub fn moment_start(xs: &[f64]) -> NigParams {
    let (m, v, s, k) = linalg::moments(xs);
    let k = k.max(0.3).max(4.0 / 3.0 * s * s + 0.1);
    let rho2 = (s * s / (3.0 * k - 4.0 * s * s)).min(0.8);
    let rho = rho2.sqrt().copysign(s);
    let zeta = 3.0 * (1.0 + 4.0 * rho2) / k;
    let gamma = (zeta / (v * (1.0 - rho2))).sqrt();
    let alpha = gamma / (1.0 - rho2).sqrt();
    let beta = rho * alpha;
    let delta = zeta / gamma;
    NigParams {
        alpha,
        beta,
        delta,
        mu: m - delta * beta / gamma,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NigFit {
    pub params: NigParams,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Maximum-likelihood NIG fit. Works on standardized data and maps the
/// estimate back, so the same optimizer bounds fit any data scale.
pub fn fit_nig(samples: &[f64]) -> Result<NigFit> {
    if samples.len() < 8 {
        return Err(Error::short(format!("NIG fit needs n >= 8, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("NIG fit input contains non-finite values"));
    }
    let m = linalg::mean(samples);
    let sd = linalg::std_dev(samples);
    if !(sd > 0.0) {
        return Err(Error::degenerate("NIG fit input has zero variance"));
    }
    let ys: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
    let n = ys.len() as f64;

    let objective = |u: &[f64]| {
        let p = Reparam::to_params(u);
        let ll = log_likelihood(&p, &ys);
        if ll.is_finite() {
            -ll / n
        } else {
            f64::INFINITY
        }
    };
    let gradient = |u: &[f64]| {
        let p = Reparam::to_params(u);
        let (_, g) = log_likelihood_and_grad(&p, &ys);
        Reparam::grad(u, &g).into_iter().map(|v| -v / n).collect::<Vec<_>>()
    };

    let start = Reparam::from_params(&moment_start(&ys));
    let opts = BfgsOptions {
        max_iter: 1000,
        grad_tol: 1e-9,
        f_tol: 1e-15,
    };
    let mut best = bfgs(objective, gradient, &start, &opts);
    if !best.converged {
        // Restart from a symmetric, moderately heavy-tailed law.
        let alt = Reparam::from_params(&NigParams { alpha: 2.0, beta: 0.0, delta: 2.0, mu: 0.0 });
        let second = bfgs(objective, gradient, &alt, &opts);
        if second.converged || second.value < best.value {
            best = second;
        }
    }
    if !best.converged {
        return Err(Error::NonConvergence(format!(
            "NIG likelihood after {} iterations",
            best.iterations
        )));
    }
    let standardized = Reparam::to_params(&best.x);
    let params = standardized.scaled(sd).shifted(m);
    let log_likelihood = log_likelihood(&params, samples);
    Ok(NigFit {
        params,
        log_likelihood,
        iterations: best.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::central_gradient;

    #[test]
    fn mean_abs_deviation_matches_reference() {
        // adaptive quadrature of |x - m| f(x) split at m, scipy norminvgauss
        let cases = [
            ((1.7, -0.6, 1.3, 0.2), [1.1667357413810417, 0.7292105230997507, 0.8013616366381435]),
            ((0.4, 0.3, 0.5, -1.0), [2.116203299957593, 1.0516110121315183, 1.702168528807491]),
            ((25.0, 3.0, 4.0, 0.0), [0.47057994516611446, 0.32223494898067306, 0.36273425216441657]),
        ];
        for ((a, b, d, mu), want) in cases {
            let p = NigParams::new(a, b, d, mu).unwrap();
            let sd = p.variance().sqrt();
            for (m, w) in [p.mean() - sd, p.mean(), p.mean() + 0.5 * sd].into_iter().zip(want) {
                let got = p.mean_abs_deviation(m);
                assert!((got - w).abs() < 1e-10, "{a} {b} {d} {mu} {m}: {got} vs {w}");
            }
        }
        let g = NigParams::standardized(1e4, 0.0).unwrap();
        assert!((g.mean_abs_deviation(0.0) - (2.0 / PI).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn standardized_has_unit_moments() {
        let p = NigParams::standardized(1.7, -0.6).unwrap();
        assert!(p.mean().abs() < 1e-15);
        assert!((p.variance() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_integrates_to_one_with_closed_form_moments() {
        let p = NigParams::new(1.5, 0.7, 0.8, -0.2).unwrap();
        let mass = integrate_line(|x| p.pdf(x), p.mean(), 1.0);
        assert!((mass - 1.0).abs() < 1e-10);
        let mean = integrate_line(|x| x * p.pdf(x), p.mean(), 1.0);
        assert!((mean - p.mean()).abs() < 1e-10);
        let var = integrate_line(|x| (x - p.mean()).powi(2) * p.pdf(x), p.mean(), 1.0);
        assert!((var - p.variance()).abs() < 1e-9);
    }

    #[test]
    fn mgf_examples() {
        let p = NigParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(p.mgf(0.0).unwrap(), 1.0);
        assert!((p.mgf(1.0).unwrap() - (2.0 - 3f64.sqrt()).exp()).abs() < 1e-15);
        assert!((p.mgf(1.0).unwrap() - 1.30728).abs() < 1e-5);
        assert_eq!(p.mgf(0.7).unwrap(), p.mgf(-0.7).unwrap());
        assert!(p.mgf(2.0).is_err());
        // numerical integration oracle
        let numeric = integrate_line(|x| (x).exp() * p.pdf(x), 0.0, 1.0);
        assert!((numeric - p.mgf(1.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = NigParams::new(1.3, -0.4, 0.9, 0.1).unwrap();
        for &x in &[-3.0, -0.2, 0.0, 0.7, 4.5] {
            let (_, g) = ln_pdf_and_grad(&p, x);
            let f = |v: &[f64]| NigParams { alpha: v[0], beta: v[1], delta: v[2], mu: v[3] }.ln_pdf(x);
            let fd = central_gradient(&f, &[p.alpha, p.beta, p.delta, p.mu], 1e-6);
            for k in 0..4 {
                assert!((g[k] - fd[k]).abs() < 1e-7, "x={x} k={k}: {} vs {}", g[k], fd[k]);
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_matches_mean() {
        let p = NigParams::new(2.0, 0.5, 1.0, 0.3).unwrap();
        let a = sample_nig(&p, 10_000, 11);
        let b = sample_nig(&p, 10_000, 11);
        assert_eq!(a, b);
        let m = linalg::mean(&a);
        let se = (p.variance() / a.len() as f64).sqrt();
        assert!((m - p.mean()).abs() < 4.0 * se);
    }

    #[test]
    fn symmetric_sample_gives_zero_skew_fit() {
        let p = NigParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let half = sample_nig(&p, 2_000, 5);
        let mut xs: Vec<f64> = half.clone();
        xs.extend(half.iter().map(|x| -x));
        let fit = fit_nig(&xs).unwrap();
        assert!(fit.params.beta.abs() < 1e-6, "beta = {}", fit.params.beta);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(fit_nig(&[1.0; 20]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_nig(&[1.0, 2.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        let p = NigParams::new(1.0, 0.3, 1.0, 0.0).unwrap();
        assert!(p.cdf(-50.0) < 1e-12);
        assert!((p.cdf(60.0) - 1.0).abs() < 1e-10);
        assert!(p.cdf(-0.5) < p.cdf(0.5));
    }
}
