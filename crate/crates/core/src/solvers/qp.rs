//! Gaussian-prior quadratic programs:
//!
//! ```text
//!     minimize    1/2 (r - mu)' Sigma^-1 (r - mu)
//!     subject to  a_i . r {>=, <=, =} b_i
//! ```
//!
//! Solved with the Goldfarb-Idnani dual active-set method. The method starts
//! from the unconstrained minimizer `mu` and only needs a matrix `J` with
//! `J J' = Sigma`, so the lower Cholesky factor of `Sigma` is used directly and
//! `Sigma^-1` is never formed. Linearly dependent active constraints (which
//! the inverse-learning programs produce in bulk) are handled by the method's
//! drop steps, so no interior point is required.
//!
//! Multipliers are reported in the ">= form": each row is oriented so that it
//! reads `n_i . r >= c_i`, and `r - mu = Sigma * sum_i lambda_i n_i` at the
//! optimum with `lambda_i >= 0` for inequality rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Sense;
use crate::error::{Error, Result};

/// Relative ridge added to a covariance that is not numerically positive definite.
pub const RIDGE_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// One constraint per row.
    pub a: DMatrix<f64>,
    pub senses: Vec<Sense>,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
    /// The active-set loop finished but the KKT residual is above tolerance.
    Inaccurate,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::MaxIter => "max_iter",
            QpStatus::Infeasible => "infeasible",
            QpStatus::Inaccurate => "inaccurate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub r: DVector<f64>,
    /// One multiplier per input row, in the ">= form" of that row.
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Largest violation of any row, measured on unit-normalized rows.
    pub max_violation: f64,
    /// Number of constraint additions and removals.
    pub iterations: usize,
    pub active: Vec<usize>,
    pub status: QpStatus,
    /// Ridge added to `Sigma` before factorization (0 if none was needed).
    pub ridge: f64,
}

impl QpProblem {
    /// Homogeneous constraints `a r (sense) 0`.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, a: DMatrix<f64>, senses: Vec<Sense>) -> Result<Self> {
        let rhs = DVector::zeros(a.nrows());
        let p = Self {
            mu,
            sigma,
            a,
            senses,
            rhs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_rhs(mut self, rhs: DVector<f64>) -> Result<Self> {
        self.rhs = rhs;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if self.sigma.shape() != (n, n) {
            return Err(Error::dim(format!(
                "sigma is {:?}, mean has length {n}",
                self.sigma.shape()
            )));
        }
        if self.a.ncols() != n && self.a.nrows() > 0 {
            return Err(Error::dim(format!(
                "constraint matrix has {} columns, expected {n}",
                self.a.ncols()
            )));
        }
        if self.senses.len() != self.a.nrows() || self.rhs.len() != self.a.nrows() {
            return Err(Error::dim("senses/rhs do not match constraint rows"));
        }
        let scale = 1.0 + self.sigma.amax();
        for i in 0..n {
            for j in 0..i {
                if (self.sigma[(i, j)] - self.sigma[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::param(
                        "sigma",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        let finite = self.mu.iter().all(|v| v.is_finite())
            && self.sigma.iter().all(|v| v.is_finite())
            && self.a.iter().all(|v| v.is_finite())
            && self.rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("qp", "non-finite data"));
        }
        Ok(())
    }

    /// Objective value at `r` (solves with the Cholesky factor of sigma).
    pub fn objective_at(&self, r: &DVector<f64>) -> Result<f64> {
        let (chol, _) = factor(&self.sigma)?;
        let y = chol
            .l()
            .solve_lower_triangular(&(r - &self.mu))
            .ok_or_else(|| Error::Singular("triangular solve".into()))?;
        Ok(0.5 * y.norm_squared())
    }

    /// Writes a portable text dump: a header line `n m`, the mean, the
    /// covariance rows, then one line per constraint `sense rhs a_1 .. a_n`.
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let join = |v: &mut dyn Iterator<Item = f64>| {
            v.map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(w, "{} {}", self.dim(), self.n_constraints())?;
        writeln!(w, "{}", join(&mut self.mu.iter().copied()))?;
        for row in self.sigma.row_iter() {
            writeln!(w, "{}", join(&mut row.iter().copied()))?;
        }
        for (i, row) in self.a.row_iter().enumerate() {
            writeln!(
                w,
                "{} {:e} {}",
                self.senses[i].symbol(),
                self.rhs[i],
                join(&mut row.iter().copied())
            )?;
        }
        Ok(())
    }
}

fn factor(sigma: &DMatrix<f64>) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let n = sigma.nrows().max(1);
    let ridge = RIDGE_FACTOR * sigma.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut s = sigma.clone();
    for i in 0..sigma.nrows() {
        s[(i, i)] += ridge;
    }
    s.cholesky()
        .map(|c| (c, ridge))
        .ok_or_else(|| Error::param("sigma", "not positive semidefinite even after ridge"))
}

/// Working state of the active-set iteration.
struct ActiveSet {
    n: usize,
    /// `J`, column-major `n x n`, with `J J' = Sigma`.
    j: Vec<f64>,
    /// Upper-triangular `R` by columns; column `k` has `k + 1` entries.
    r: Vec<Vec<f64>>,
    /// Constraint index and orientation (+1 / -1) of each active row.
    rows: Vec<(usize, f64)>,
    u: Vec<f64>,
}

impl ActiveSet {
    fn q(&self) -> usize {
        self.rows.len()
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.j[k * self.n..(k + 1) * self.n]
    }

    fn rotate_cols(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let n = self.n;
        let (lo, hi) = self.j.split_at_mut(b * n);
        let ca = &mut lo[a * n..(a + 1) * n];
        let cb = &mut hi[..n];
        for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
            let (xa, yb) = (*x, *y);
            *x = c * xa + s * yb;
            *y = -s * xa + c * yb;
        }
    }

    /// `d = J' n`.
    fn project(&self, normal: &[f64]) -> Vec<f64> {
        (0..self.n).map(|k| dot(self.col(k), normal)).collect()
    }

    /// Primal step `z = J2 d2` and dual step `R^-1 d1`.
    fn directions(&self, d: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let q = self.q();
        let mut z = vec![0.0; self.n];
        for (k, &dk) in d.iter().enumerate().skip(q) {
            if dk != 0.0 {
                axpy(dk, self.col(k), &mut z);
            }
        }
        let mut rv = d[..q].to_vec();
        for i in (0..q).rev() {
            rv[i] /= self.r[i][i];
            let ri = rv[i];
            for (k, v) in rv.iter_mut().enumerate().take(i) {
                *v -= ri * self.r[i][k];
            }
        }
        (z, rv)
    }

    fn add(&mut self, row: usize, orient: f64, mut d: Vec<f64>, u: f64) {
        let q = self.q();
        for i in (q + 1..self.n).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let h = d[i - 1].hypot(d[i]);
            let (c, s) = (d[i - 1] / h, d[i] / h);
            d[i - 1] = h;
            d[i] = 0.0;
            self.rotate_cols(i - 1, i, c, s);
        }
        d.truncate(q + 1);
        self.r.push(d);
        self.rows.push((row, orient));
        self.u.push(u);
    }

    fn drop(&mut self, pos: usize) {
        self.r.remove(pos);
        self.rows.remove(pos);
        self.u.remove(pos);
        // columns pos.. now have one sub-diagonal entry; rotate it away
        let q = self.q();
        for i in pos..q {
            let (a, b) = (self.r[i][i], self.r[i][i + 1]);
            if b == 0.0 {
                self.r[i].truncate(i + 1);
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for col in self.r[i..].iter_mut() {
                let (x, y) = (col[i], col[i + 1]);
                col[i] = c * x + s * y;
                col[i + 1] = -s * x + c * y;
            }
            self.r[i].truncate(i + 1);
            self.rotate_cols(i, i + 1, c, s);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves the program. `tol` bounds the reported KKT residual of an
/// `Optimal` solution; `max_iters` caps additions plus removals.
pub fn solve_qp(problem: &QpProblem, tol: f64, max_iters: usize) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.dim();
    let m = problem.n_constraints();
    let (chol, ridge) = factor(&problem.sigma)?;
    let sigma = if ridge > 0.0 {
        let mut s = problem.sigma.clone();
        for i in 0..n {
            s[(i, i)] += ridge;
        }
        s
    } else {
        problem.sigma.clone()
    };

    // unit-normalized ">=" rows; equality rows keep their given orientation
    let row_norm: Vec<f64> = (0..m).map(|i| problem.a.row(i).norm()).collect();
    let max_norm = row_norm.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut normals = vec![0.0; m * n];
    let mut bound = vec![0.0; m];
    let mut trivial = vec![false; m];
    for i in 0..m {
        let sign = if problem.senses[i] == Sense::Le { -1.0 } else { 1.0 };
        if row_norm[i] <= 1e-12 * max_norm || row_norm[i] == 0.0 {
            trivial[i] = true;
            continue;
        }
        for k in 0..n {
            normals[i * n + k] = sign * problem.a[(i, k)] / row_norm[i];
        }
        bound[i] = sign * problem.rhs[i] / row_norm[i];
    }
    let normal = |i: usize| &normals[i * n..(i + 1) * n];
    let is_eq = |i: usize| problem.senses[i] == Sense::Eq;

    let feas_tol = (tol * 1e-2).max(1e-14);
    let dep_tol = 1e-20;

    let mut state = ActiveSet {
        n,
        j: chol.l().as_slice().to_vec(),
        r: Vec::new(),
        rows: Vec::new(),
        u: Vec::new(),
    };
    let mut x: Vec<f64> = problem.mu.iter().copied().collect();
    let mut in_active = vec![false; m];
    let mut redundant = vec![false; m];
    let mut iterations = 0usize;
    let mut status = QpStatus::Optimal;

    // a trivial row that its rhs already violates can never be satisfied
    for i in (0..m).filter(|&i| trivial[i]) {
        let b = problem.rhs[i];
        let ok = match problem.senses[i] {
            Sense::Ge => b <= feas_tol,
            Sense::Le => b >= -feas_tol,
            Sense::Eq => b.abs() <= feas_tol,
        };
        if !ok {
            status = QpStatus::Infeasible;
        }
    }

    'outer: while status == QpStatus::Optimal {
        // pick the next row: pending equalities first, then the most violated inequality
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..m {
            if trivial[i] || in_active[i] || redundant[i] || !is_eq(i) {
                continue;
            }
            let s = dot(normal(i), &x) - bound[i];
            pick = Some((i, if s > 0.0 { -1.0 } else { 1.0 }));
            break;
        }
        if pick.is_none() {
            let mut worst = -feas_tol;
            for i in 0..m {
                if trivial[i] || in_active[i] || is_eq(i) {
                    continue;
                }
                let s = dot(normal(i), &x) - bound[i];
                if s < worst {
                    worst = s;
                    pick = Some((i, 1.0));
                }
            }
        }
        let Some((p, orient)) = pick else {
            break;
        };
        let np: Vec<f64> = normal(p).iter().map(|v| orient * v).collect();
        let bp = orient * bound[p];
        let mut u_p = 0.0;

        loop {
            if iterations >= max_iters {
                status = QpStatus::MaxIter;
                break 'outer;
            }
            let slack = dot(&np, &x) - bp;
            let d = state.project(&np);
            let (z, rv) = state.directions(&d);
            let q = state.q();
            let d2: f64 = d[q..].iter().map(|v| v * v).sum();
            let dn: f64 = d.iter().map(|v| v * v).sum();
            let dependent = d2 <= dep_tol * dn;

            if dependent && is_eq(p) && slack.abs() <= feas_tol {
                redundant[p] = true;
                continue 'outer;
            }

            // dual step bound over active inequality rows
            let rscale = rv.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mut t1 = f64::INFINITY;
            let mut drop_pos = None;
            for k in 0..q {
                let (row, _) = state.rows[k];
                if is_eq(row) || rv[k] <= 1e-15 * rscale {
                    continue;
                }
                let t = state.u[k] / rv[k];
                if t < t1 {
                    t1 = t;
                    drop_pos = Some(k);
                }
            }
            let t2 = if dependent {
                f64::INFINITY
            } else {
                (-slack / dot(&z, &np)).max(0.0)
            };
            if t1.is_infinite() && t2.is_infinite() {
                status = QpStatus::Infeasible;
                break 'outer;
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                axpy(t, &z, &mut x);
            }
            for (uk, rk) in state.u.iter_mut().zip(&rv) {
                *uk -= t * rk;
            }
            u_p += t;
            iterations += 1;
            if t2 <= t1 {
                state.add(p, orient, d, u_p);
                in_active[p] = true;
                continue 'outer;
            }
            let pos = drop_pos.expect("finite t1 has a row");
            in_active[state.rows[pos].0] = false;
            state.drop(pos);
        }
    }

    // multipliers back on the original rows, ">= form"
    let mut multipliers = DVector::zeros(m);
    for (k, &(row, orient)) in state.rows.iter().enumerate() {
        multipliers[row] = orient * state.u[k] / row_norm[row];
    }
    let r = DVector::from_vec(x);

    let mut max_violation = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut dual_infeas = 0.0f64;
    let mut grad = DVector::zeros(n);
    for i in 0..m {
        if trivial[i] {
            continue;
        }
        let s = dot(normal(i), r.as_slice()) - bound[i];
        let viol = if is_eq(i) { s.abs() } else { (-s).max(0.0) };
        max_violation = max_violation.max(viol);
        let lam_unit = multipliers[i] * row_norm[i];
        if !is_eq(i) {
            dual_infeas = dual_infeas.max(-lam_unit);
            complementarity = complementarity.max((lam_unit * s).abs());
        }
        if lam_unit != 0.0 {
            grad.axpy(lam_unit, &DVector::from_column_slice(normal(i)), 1.0);
        }
    }
    let step = &r - &problem.mu;
    let stationarity = (&step - &sigma * &grad).amax() / (1.0 + step.amax());
    let kkt_residual = stationarity
        .max(max_violation)
        .max(dual_infeas)
        .max(complementarity);
    if status == QpStatus::Optimal && kkt_residual >= tol {
        status = QpStatus::Inaccurate;
    }
    let y = chol
        .l()
        .solve_lower_triangular(&step)
        .ok_or_else(|| Error::Singular("triangular solve".into()))?;
    let mut active: Vec<usize> = state.rows.iter().map(|&(i, _)| i).collect();
    active.sort_unstable();

    Ok(QpSolution {
        r,
        multipliers,
        objective: 0.5 * y.norm_squared(),
        kkt_residual,
        max_violation,
        iterations,
        active,
        status,
        ridge,
    })
}
