//! Two-phase tableau simplex.
//!
//! Solves `maximize c.x` subject to rows `a_i . x {<=, >=, =} b_i` and `x >= 0`.
//! Pivoting is deterministic (lowest-index entering column, a Harris ratio
//! test with index tie-breaks, Bland's rule after a repeated basis), so the
//! returned vertex is a pure function of the input.

use std::collections::HashSet;

use nalgebra::DMatrix;

use super::Sense;
use crate::error::{Error, Result};

/// Smallest pivot element accepted by the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Primal infeasibility tolerated by the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-9;
/// Largest negative reduced cost accepted when the basis sequence repeats.
const STALL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Coefficients of the maximized objective.
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow price of each constraint row: `d objective / d b_i`.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn constraint(mut self, row: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::dim("linear program has no variables"));
        }
        if self.rows.len() != self.senses.len() || self.rows.len() != self.rhs.len() {
            return Err(Error::dim("rows, senses and rhs differ in length"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::dim(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.rows.iter().flatten())
            .chain(&self.rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("lp", "non-finite data"));
        }
        Ok(())
    }
}

/// Dense tableau that is re-derived from the original rows after every pivot,
/// so roundoff cannot accumulate across pivots.
struct Tableau {
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    t: Vec<Vec<f64>>,
    /// The standard-form constraint rows `[A | b]` before any pivot.
    original: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may never enter (artificials in phase 2).
    barred: Vec<bool>,
    tol: f64,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn width(&self) -> usize {
        self.t[0].len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width() + 1;
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..w {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
        self.reinvert();
        self.price();
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.price();
    }

    /// Resets the reduced-cost row for maximizing `cost . x`.
    fn price(&mut self) {
        let cost = &self.cost;
        let m = self.m();
        let w = self.width();
        let mut z = vec![0.0; w + 1];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=w {
                    z[j] += cb * self.t[i][j];
                }
            }
        }
        for j in 0..w {
            z[j] -= cost[j];
        }
        self.t[m] = z;
    }

    /// Recomputes the constraint rows as `B^-1 [A | b]` from the original
    /// standard-form data, discarding roundoff accumulated by pivoting.
    /// Falls back to the eliminated rows if the basis is numerically singular.
    fn reinvert(&mut self) {
        let m = self.m();
        let w = self.width();
        let a = &self.original;
        let basis = DMatrix::from_fn(m, m, |i, k| a[i][self.basis[k]]);
        let full = DMatrix::from_fn(m, w + 1, |i, j| a[i][j]);
        let Some(sol) = basis.lu().solve(&full) else {
            return;
        };
        for i in 0..m {
            for j in 0..=w {
                self.t[i][j] = sol[(i, j)];
            }
            for (k, &b) in self.basis.iter().enumerate() {
                self.t[i][b] = if i == k { 1.0 } else { 0.0 };
            }
            // basic values are non-negative in exact arithmetic
            if self.t[i][w] < 0.0 && self.t[i][w] > -PIVOT_TOL {
                self.t[i][w] = 0.0;
            }
        }
    }

    /// Pivots until optimal; `Err(LpUnbounded)` if a ray is found.
    ///
    /// The entering column is the lowest-index improving one. The leaving row
    /// comes from a two-pass ratio test: among rows within `HARRIS_TOL` of the
    /// minimum ratio, take the largest pivot element, which keeps the basis
    /// well conditioned on degenerate vertices. If a basis repeats, the rest of
    /// the run falls back to Bland's lowest-index rule; a second repeat means
    /// the reduced costs are at noise level.
    fn optimize(&mut self) -> Result<()> {
        let m = self.m();
        let mut seen = HashSet::new();
        let mut bland = false;
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::LpIterationLimit(self.max_pivots));
            }
            let w = self.width();
            let entering = (0..w).find(|&j| !self.barred[j] && self.t[m][j] < -self.tol);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut key = self.basis.clone();
            key.sort_unstable();
            if !seen.insert(key) {
                if !bland {
                    bland = true;
                    seen.clear();
                } else {
                    let worst = (0..w)
                        .filter(|&j| !self.barred[j])
                        .map(|j| self.t[m][j])
                        .fold(0.0, f64::min);
                    if worst >= -STALL_TOL {
                        return Ok(());
                    }
                    return Err(Error::LpIterationLimit(self.pivots));
                }
            }
            let row = if bland {
                self.bland_row(col)
            } else {
                self.harris_row(col)
            };
            match row {
                Some(row) => self.pivot(row, col),
                None => return Err(Error::LpUnbounded),
            }
        }
    }

    fn candidates(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let floor = PIVOT_TOL.max(self.tol);
        (0..self.m()).filter_map(move |i| {
            let a = self.t[i][col];
            (a > floor).then_some((i, a))
        })
    }

    fn harris_row(&self, col: usize) -> Option<usize> {
        let w = self.width();
        let bound = self
            .candidates(col)
            .map(|(i, a)| (self.t[i][w].max(0.0) + HARRIS_TOL) / a)
            .fold(f64::INFINITY, f64::min);
        let mut best: Option<(f64, usize)> = None;
        for (i, a) in self.candidates(col) {
            if self.t[i][w].max(0.0) / a <= bound {
                let better = match best {
                    None => true,
                    Some((b, k)) => a > b || (a == b && self.basis[i] < self.basis[k]),
                };
                if better {
                    best = Some((a, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    fn bland_row(&self, col: usize) -> Option<usize> {
        let w = self.width();
        let mut best: Option<(f64, usize)> = None;
        for (i, a) in self.candidates(col) {
            let ratio = self.t[i][w] / a;
            let better = match best {
                None => true,
                Some((r, k)) => {
                    ratio < r - self.tol || (ratio <= r + self.tol && self.basis[i] < self.basis[k])
                }
            };
            if better {
                best = Some((ratio, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Solves the linear program. `tol` is the pivot and optimality threshold.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.objective.len();
    let m = lp.rows.len();

    // orient every row to a non-negative rhs
    let mut flip = vec![1.0; m];
    let mut senses = lp.senses.clone();
    for i in 0..m {
        if lp.rhs[i] < 0.0 {
            flip[i] = -1.0;
            senses[i] = senses[i].flipped();
        }
    }
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let width = n + n_slack + n_art;
    let art_start = n + n_slack;

    let mut t = vec![vec![0.0; width + 1]; m + 1];
    let mut basis = vec![0; m];
    let mut unit_col = vec![0; m];
    let (mut next_slack, mut next_art) = (n, art_start);
    for i in 0..m {
        for j in 0..n {
            t[i][j] = flip[i] * lp.rows[i][j];
        }
        t[i][width] = flip[i] * lp.rhs[i];
        match senses[i] {
            Sense::Le => {
                t[i][next_slack] = 1.0;
                basis[i] = next_slack;
                unit_col[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t[i][next_slack] = -1.0;
                next_slack += 1;
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
        }
    }

    let original = t[..m].to_vec();
    let mut tab = Tableau {
        t,
        original,
        cost: vec![0.0; width],
        basis,
        barred: vec![false; width],
        tol,
        pivots: 0,
        max_pivots: 1000 * (m + width + 1),
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; width];
        for c in phase1.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        tab.set_cost(phase1);
        tab.optimize()?;
        let infeasibility = -tab.t[m][width];
        let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > tol * scale {
            return Err(Error::LpInfeasible);
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(col) = (0..art_start).find(|&j| tab.t[i][j].abs() > tol) {
                    tab.pivot(i, col);
                }
            }
        }
        for b in tab.barred.iter_mut().skip(art_start) {
            *b = true;
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    tab.set_cost(cost.clone());
    tab.optimize()?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[i][width];
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let duals = (0..m)
        .map(|i| {
            let y: f64 = (0..m).map(|k| cost[tab.basis[k]] * tab.t[k][unit_col[i]]).sum();
            flip[i] * y
        })
        .collect();
    Ok(LpSolution {
        x,
        objective,
        duals,
        pivots: tab.pivots,
    })
}
