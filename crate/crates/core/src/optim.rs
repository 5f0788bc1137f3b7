//! Small dense optimizers: BFGS with a backtracking line search, a Newton
//! polish on finite-difference Hessians, and Brent's bracketed root finder.
//!
//! Objectives are minimized. A non-finite objective value marks an infeasible
//! point and makes the line search back off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective change stays below this for two
    /// consecutive iterations.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-7,
            f_tol: 1e-13,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
}

/// Finite-difference step used for coordinate `x`.
#[inline]
pub fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient with step `rel * max(|x_i|, 1)`.
pub fn central_gradient<F>(f: &F, x: &[f64], rel: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i], rel);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Symmetrized Hessian from central differences of `grad`.
pub fn fd_hessian<G>(grad: &G, x: &[f64], rel: f64) -> DMatrix<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = fd_step(x[j], rel);
        xp[j] = x[j] + step;
        let gp = grad(&xp);
        xp[j] = x[j] - step;
        let gm = grad(&xp);
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Quasi-Newton minimization.
pub fn bfgs<F, G>(f: F, grad: G, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut small_steps = 0;
    let mut first = true;

    for iter in 0..opts.max_iter {
        if max_norm(g.as_slice()) < opts.grad_tol {
            return Minimum {
                x: x.as_slice().to_vec(),
                value: fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir = -(&hinv * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 || !slope.is_finite() {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        // Keep the very first step modest; the identity metric knows nothing
        // about scale yet.
        let mut step = if first {
            (1.0 / max_norm(dir.as_slice()).max(1e-12)).min(1.0)
        } else {
            1.0
        };
        first = false;

        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &dir * step;
            let fnew = f(xn.as_slice());
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // No descent along a quasi-Newton direction: restart the metric
            // once, otherwise we are at numerical precision.
            if hinv != DMatrix::identity(n, n) {
                hinv = DMatrix::identity(n, n);
                first = true;
                continue;
            }
            return Minimum {
                x: x.as_slice().to_vec(),
                value: fx,
                iterations: iter,
                converged: max_norm(g.as_slice()) < opts.grad_tol.sqrt(),
            };
        };

        let gn = DVector::from_vec(grad(xn.as_slice()));
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - (&s * y.transpose()) * rho;
            let right = &i - (&y * s.transpose()) * rho;
            hinv = &left * &hinv * &right + (&s * s.transpose()) * rho;
        }

        let rel_change = (fx - fnew).abs() / (1.0 + fx.abs());
        x = xn;
        g = gn;
        fx = fnew;
        if rel_change < opts.f_tol {
            small_steps += 1;
            if small_steps >= 2 {
                return Minimum {
                    x: x.as_slice().to_vec(),
                    value: fx,
                    iterations: iter + 1,
                    converged: true,
                };
            }
        } else {
            small_steps = 0;
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations: opts.max_iter,
        converged: false,
    }
}

/// Damped Newton iterations on finite-difference derivatives, for driving an
/// interior optimum to a tight gradient tolerance after BFGS has done the
/// global work.
pub fn newton_polish<F>(f: &F, x0: &[f64], grad_rel: f64, grad_tol: f64, max_iter: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let grad = |x: &[f64]| central_gradient(f, x, grad_rel);
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let n = x.len();
    for iter in 0..max_iter {
        let g = grad(&x);
        if max_norm(&g) < grad_tol {
            return Minimum {
                x,
                value: fx,
                iterations: iter,
                converged: true,
            };
        }
        let h = fd_hessian(&grad, &x, 1e-4);
        let gv = DVector::from_vec(g.clone());
        let mut lambda = 0.0;
        let mut dir = None;
        for _ in 0..30 {
            let shifted = &h + DMatrix::<f64>::identity(n, n) * lambda;
            if let Some(ch) = shifted.cholesky() {
                dir = Some(-ch.solve(&gv));
                break;
            }
            lambda = if lambda == 0.0 {
                1e-8 * h.diagonal().amax().max(1.0)
            } else {
                lambda * 10.0
            };
        }
        let Some(dir) = dir else { break };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-12 * (1.0 + fx.abs()) {
                x = xn;
                fx = fnew;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let g = grad(&x);
    Minimum {
        converged: max_norm(&g) < grad_tol,
        x,
        value: fx,
        iterations: max_iter,
    }
}

/// Brent's method on `[lo, hi]`; requires a sign change.
pub fn brent_root<G>(g: G, lo: f64, hi: f64, x_tol: f64, f_tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRoot(format!(
            "g({lo:e}) = {fa:e}, g({hi:e}) = {fb:e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if fb.abs() <= f_tol || m.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (p, q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            let (p, q) = if p > 0.0 { (p, -q) } else { (-p, q) };
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
    }
    Ok(b)
}
