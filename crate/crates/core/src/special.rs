//! Special functions that are not in `statrs`: exponentially scaled modified
//! Bessel functions of the second kind of orders 0 and 1, which the
//! normal-inverse-Gaussian density and score need.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Returns `(e^x K0(x), e^x K1(x))` for `x > 0`, NaN otherwise (optimizer
/// line searches do probe such points).
///
/// Power series below `x = 2`, Steed's continued fraction above. Both branches
/// are accurate to a few ulps on their range.
pub fn bessel_k01_scaled(x: f64) -> (f64, f64) {
    if !(x > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    if x == f64::INFINITY {
        return (0.0, 0.0);
    }
    if x <= 2.0 {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_steed_scaled(x)
    }
}

/// `ln K1(x)` without overflow or underflow for large `x`.
pub fn ln_bessel_k1(x: f64) -> f64 {
    let (_, k1e) = bessel_k01_scaled(x);
    k1e.ln() - x
}

/// `K0(x)/K1(x)`, the ratio that shows up in the NIG score.
pub fn bessel_k0_over_k1(x: f64) -> f64 {
    let (k0e, k1e) = bessel_k01_scaled(x);
    k0e / k1e
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // I0, I1 and the digamma-weighted companions of A&S 9.6.13 / 9.6.11.
    let mut term0 = 1.0; // y^k / (k!)^2
    let mut term1 = 1.0; // y^k / (k! (k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut harmonic = 0.0; // H_k
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term0 *= y / (kf * kf);
            term1 *= y / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        i0 += term0;
        i1 += term1;
        s0 += harmonic * term0;
        // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        s1 += (2.0 * harmonic + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * term1;
        if term0 < 1e-18 * i0 && k > 2 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn k01_steed_scaled(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `∫ f(x) dx` over the real line for integrands with at least exponential
/// tails, by the trapezoid rule after the substitution `x = center +
/// scale·sinh(t)`. The transformed integrand decays double-exponentially,
/// so a fixed step converges geometrically.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, center: f64, scale: f64) -> f64 {
    let h = 1.0 / 64.0;
    let g = |t: f64| {
        let v = f(center + scale * t.sinh());
        if v == 0.0 {
            0.0
        } else {
            v * scale * t.cosh()
        }
    };
    let mut sum = g(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let (a, b) = (g(t), g(-t));
        sum += a + b;
        if (t > 3.0 && (a.abs() + b.abs()) <= 1e-17 * sum.abs()) || t > 12.0 {
            break;
        }
        k += 1;
    }
    sum * h
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
