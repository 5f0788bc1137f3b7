//! Bounded-variable revised simplex for `min cᵀx, Ax = b, l ≤ x ≤ u` with a
//! dense, column-major `A` that has few rows and many columns.
//!
//! Phase 1 starts from artificial columns; Dantzig pricing switches to
//! Bland's rule after a run of degenerate pivots so the method cannot cycle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Lp {
    pub m: usize,
    pub n: usize,
    /// Column-major `m × n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex multipliers `y` with `Bᵀy = c_B`.
    pub y: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic variable resting at zero.
    Zero,
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;

struct Tableau<'a> {
    lp: &'a Lp,
    /// Costs in force for the current phase (structural then artificial).
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Signs of the artificial unit columns.
    art_sign: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn total(&self) -> usize {
        self.lp.n + self.lp.m
    }

    fn column(&self, j: usize, out: &mut DVector<f64>) {
        let m = self.lp.m;
        if j < self.lp.n {
            out.copy_from_slice(&self.lp.a[j * m..(j + 1) * m]);
        } else {
            out.fill(0.0);
            let r = j - self.lp.n;
            out[r] = self.art_sign[r];
        }
    }

    fn dot_column(&self, j: usize, y: &DVector<f64>) -> f64 {
        let m = self.lp.m;
        if j < self.lp.n {
            self.lp.a[j * m..(j + 1) * m].iter().zip(y.iter()).map(|(a, b)| a * b).sum()
        } else {
            let r = j - self.lp.n;
            self.art_sign[r] * y[r]
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.lp.m;
        let mut bm = DMatrix::zeros(m, m);
        let mut col = DVector::zeros(m);
        for (i, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            bm.set_column(i, &col);
        }
        self.binv = bm.try_inverse().ok_or_else(|| Error::Lp("numerically singular basis".into()))?;
        Ok(())
    }

    /// Recompute basic values from the nonbasic ones.
    fn recompute_basics(&mut self) {
        let m = self.lp.m;
        let mut r = DVector::from_column_slice(&self.lp.b);
        let mut col = DVector::zeros(m);
        for j in 0..self.total() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                self.column(j, &mut col);
                r.axpy(-self.x[j], &col, 1.0);
            }
        }
        let xb = &self.binv * r;
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
    }

    fn run(&mut self, max_iter: usize) -> Result<()> {
        let m = self.lp.m;
        let total = self.total();
        let mut col = DVector::zeros(m);
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Lp(format!("not solved within {max_iter} iterations")));
            }
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| self.cost[j]));
            let y = self.binv.transpose() * cb;
            let bland = degenerate >= DEGENERATE_RUN;

            // Pricing.
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == State::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(j, &y);
                let dir = match st {
                    State::Lower if d < -OPT_TOL => 1.0,
                    State::Upper if d > OPT_TOL => -1.0,
                    State::Zero if d.abs() > OPT_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else { return Ok(()) };
            self.iterations += 1;

            self.column(q, &mut col);
            let alpha = &self.binv * &col;
            // x_B moves by -dir·t·alpha as x_q moves by dir·t.
            let mut t_max = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_piv = 0.0;
            for i in 0..m {
                let delta = -dir * alpha[i];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[i];
                let (limit, to_upper) = if delta < 0.0 {
                    ((self.x[j] - self.lower[j]) / -delta, false)
                } else {
                    ((self.upper[j] - self.x[j]) / delta, true)
                };
                let limit = limit.max(0.0);
                let take = if limit < t_max - 1e-12 {
                    true
                } else if limit <= t_max + 1e-12 {
                    match leave {
                        Some((li, _)) if bland => j < self.basis[li],
                        Some(_) => delta.abs() > leave_piv,
                        None => false,
                    }
                } else {
                    false
                };
                if take {
                    t_max = limit;
                    leave = Some((i, to_upper));
                    leave_piv = delta.abs();
                }
            }
            if !t_max.is_finite() {
                return Err(Error::Lp("unbounded".into()));
            }
            degenerate = if t_max <= 1e-12 { degenerate + 1 } else { 0 };

            self.x[q] += dir * t_max;
            for i in 0..m {
                let j = self.basis[i];
                self.x[j] -= dir * t_max * alpha[i];
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((i, to_upper)) => {
                    let j = self.basis[i];
                    self.state[j] = if to_upper { State::Upper } else { State::Lower };
                    self.x[j] = if to_upper { self.upper[j] } else { self.lower[j] };
                    self.state[q] = State::Basic;
                    self.basis[i] = q;
                    // rank-one update of the inverse
                    let piv = alpha[i];
                    let row = self.binv.row(i).into_owned() / piv;
                    for r in 0..m {
                        if r != i {
                            let f = alpha[r];
                            if f != 0.0 {
                                let upd = &row * f;
                                let mut target = self.binv.row_mut(r);
                                target -= upd;
                            }
                        }
                    }
                    self.binv.set_row(i, &row);
                    if self.iterations % 100 == 0 {
                        self.refactor()?;
                        self.recompute_basics();
                    }
                }
            }
        }
    }
}

/// Solve `lp` starting with every structural variable at the value in
/// `start` (which must lie within its bounds).
pub fn solve(lp: &Lp, start: &[f64], max_iter: usize) -> Result<LpSolution> {
    let (m, n) = (lp.m, lp.n);
    if lp.a.len() != m * n || lp.b.len() != m || lp.c.len() != n || lp.lower.len() != n || lp.upper.len() != n {
        return Err(Error::Mismatch("LP dimensions".into()));
    }
    let mut state = Vec::with_capacity(n + m);
    let mut x = Vec::with_capacity(n + m);
    for j in 0..n {
        let (l, u, v) = (lp.lower[j], lp.upper[j], start[j]);
        if v < l || v > u {
            return Err(Error::Lp(format!("start value {v} of column {j} outside [{l}, {u}]")));
        }
        let st = if v == l {
            State::Lower
        } else if v == u {
            State::Upper
        } else if v == 0.0 && l == f64::NEG_INFINITY && u == f64::INFINITY {
            State::Zero
        } else {
            return Err(Error::Lp(format!("start value of column {j} is not at a bound")));
        };
        state.push(st);
        x.push(v);
    }
    // residual b − A x_N fixes the artificial signs
    let mut res = lp.b.clone();
    for j in 0..n {
        if x[j] != 0.0 {
            for i in 0..m {
                res[i] -= lp.a[j * m + i] * x[j];
            }
        }
    }
    let art_sign: Vec<f64> = res.iter().map(|r| if *r < 0.0 { -1.0 } else { 1.0 }).collect();
    for r in &res {
        state.push(State::Basic);
        x.push(r.abs());
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut cost = vec![0.0; n];
    cost.extend(std::iter::repeat_n(1.0, m));

    let mut t = Tableau {
        lp,
        cost,
        lower,
        upper,
        art_sign: art_sign.clone(),
        x,
        state,
        basis: (n..n + m).collect(),
        binv: DMatrix::from_diagonal(&DVector::from_column_slice(&art_sign)),
        iterations: 0,
    };
    t.run(max_iter)?;
    // one more pass from a fresh factorization guards against drift
    t.refactor()?;
    t.recompute_basics();
    t.run(max_iter)?;
    let infeas: f64 = (n..n + m).map(|j| t.x[j]).sum();
    let scale = 1.0 + lp.b.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if infeas > FEAS_TOL * scale {
        return Err(Error::Infeasible(format!("phase-1 residual {infeas:e}")));
    }

    // Phase 2: artificials pinned at zero.
    for j in n..n + m {
        t.upper[j] = 0.0;
        t.cost[j] = 0.0;
        if t.state[j] == State::Basic {
            t.x[j] = t.x[j].max(0.0);
        } else {
            t.state[j] = State::Lower;
            t.x[j] = 0.0;
        }
    }
    t.cost[..n].copy_from_slice(&lp.c);
    t.refactor()?;
    t.recompute_basics();
    t.run(max_iter)?;
    t.refactor()?;
    t.recompute_basics();

    let cb = DVector::from_iterator(m, t.basis.iter().map(|&j| t.cost[j]));
    let y = t.binv.transpose() * cb;
    let x: Vec<f64> = t.x[..n].to_vec();
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    let worst = (0..m)
        .map(|i| ((0..n).map(|j| lp.a[j * m + i] * x[j]).sum::<f64>() - lp.b[i]).abs())
        .chain((0..n).map(|j| (lp.lower[j] - x[j]).max(x[j] - lp.upper[j]).max(0.0)))
        .fold(0.0, f64::max);
    if worst > 1e-7 * scale {
        return Err(Error::Lp(format!("final point violates constraints by {worst:e}")));
    }
    Ok(LpSolution {
        x,
        objective,
        y: y.as_slice().to_vec(),
        iterations: t.iterations,
    })
}
