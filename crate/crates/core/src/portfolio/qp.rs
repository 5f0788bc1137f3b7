//! Convex QP `min ½wᵀQw − cᵀw` over `Σw = 1`, optionally with `w ≥ 0`.
//!
//! The long-only case is a primal active-set method started from equal
//! weights; the signed case is one KKT solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub w: DVector<f64>,
    /// Multiplier of the budget constraint.
    pub nu: f64,
    /// Max-norm KKT residual (stationarity, dual feasibility and
    /// complementarity on the free/bound sets).
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Equality-constrained subproblem on the index set `free`.
fn solve_on(q: &DMatrix<f64>, c: &DVector<f64>, free: &[usize]) -> Option<(DVector<f64>, f64)> {
    let f = free.len();
    let mut k = DMatrix::zeros(f + 1, f + 1);
    let mut rhs = DVector::zeros(f + 1);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            k[(a, b)] = q[(i, j)];
        }
        k[(a, f)] = -1.0;
        k[(f, a)] = 1.0;
        rhs[a] = c[i];
    }
    rhs[f] = 1.0;
    let sol = k.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, f).into_owned(), sol[f]))
}

fn kkt_residual(q: &DMatrix<f64>, c: &DVector<f64>, w: &DVector<f64>, nu: f64, long_only: bool) -> f64 {
    let g = q * w - c;
    let mut r = (w.sum() - 1.0).abs();
    for i in 0..w.len() {
        let gi = g[i] - nu;
        if long_only {
            r = r.max((-w[i]).max(0.0));
            // interior weights need zero reduced gradient, zero weights a
            // nonnegative one
            r = r.max(if w[i] > 1e-12 { gi.abs() } else { (-gi).max(0.0) });
        } else {
            r = r.max(gi.abs());
        }
    }
    r
}

/// Solve the budget-constrained QP. `q` must be positive semidefinite and
/// positive definite on the budget hyperplane for the signed case.
pub fn solve(q: &DMatrix<f64>, c: &DVector<f64>, long_only: bool) -> Result<QpSolution> {
    let n = c.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Mismatch(format!("{}x{} Hessian for {n} assets", q.nrows(), q.ncols())));
    }
    let all: Vec<usize> = (0..n).collect();
    if !long_only {
        let (w, nu) =
            solve_on(q, c, &all).ok_or_else(|| Error::degenerate("singular KKT system for the signed frontier"))?;
        let kkt = kkt_residual(q, c, &w, nu, false);
        return Ok(QpSolution { w, nu, kkt_residual: kkt, iterations: 1 });
    }

    let tol = 1e-12;
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let mut at_zero = vec![false; n];
    let mut nu;
    for iter in 1..=50 * n + 50 {
        let free: Vec<usize> = all.iter().copied().filter(|&i| !at_zero[i]).collect();
        let (wf, nu_f) = solve_on(q, c, &free).ok_or_else(|| Error::degenerate("singular reduced KKT system"))?;
        let mut target = DVector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            target[i] = wf[a];
        }
        // Largest feasible step toward the subproblem optimum.
        let mut step = 1.0;
        let mut blocking = None;
        for &i in &free {
            let d = target[i] - w[i];
            if d < -tol && target[i] < 0.0 {
                let t = w[i] / -d;
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
        }
        w += (&target - &w) * step;
        if let Some(i) = blocking {
            w[i] = 0.0;
            at_zero[i] = true;
            continue;
        }
        nu = nu_f;
        for &i in &free {
            w[i] = w[i].max(0.0);
        }
        // Multipliers of the active bounds; release the most negative.
        let g = q * &w - c;
        let mut worst = None;
        let mut worst_val = -1e-13 * (1.0 + c.amax() + q.amax());
        for i in 0..n {
            if at_zero[i] {
                let lam = g[i] - nu;
                if lam < worst_val {
                    worst_val = lam;
                    worst = Some(i);
                }
            }
        }
        match worst {
            Some(i) => at_zero[i] = false,
            None => {
                let s = w.sum();
                w /= s;
                let kkt = kkt_residual(q, c, &w, nu, true);
                return Ok(QpSolution { w, nu, kkt_residual: kkt, iterations: iter });
            }
        }
    }
    Err(Error::NonConvergence("active-set QP exceeded its iteration budget".into()))
}
