//! Minimax solutions of matrix games and of discounted zero-sum stochastic games.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{check_gamma, MarkovGame, Player};
use crate::layout::RewardVector;
use crate::operators::{build_g, expected_reward, Resolvent};
use crate::policy::Bipolicy;
use crate::solvers::lp::{solve_lp, LinearProgram};
use crate::solvers::Sense;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Pivot tolerance of the matrix-game linear programs.
const LP_TOL: f64 = 1e-10;

/// Minimax solution of a matrix game; the row player maximizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub strategy1: DVector<f64>,
    pub strategy2: DVector<f64>,
    pub value: f64,
}

/// Discounted expected return of player 1 from every state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: DVector<f64>,
}

impl ValueFunction {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn max_abs_diff(&self, other: &ValueFunction) -> f64 {
        (&self.values - &other.values).amax()
    }
}

/// Solves a matrix game through the linear program
/// `max sum(w)  s.t.  A' w <= 1, w >= 0` on the payoffs `A'` shifted to be at
/// least 1. Then `1 / sum(w)` is the shifted value, `w / sum(w)` is the column
/// player's strategy and the normalized row duals are the row player's.
pub fn solve_matrix_game(payoff: &DMatrix<f64>, tol: f64) -> Result<MatrixGameSolution> {
    let (rows, cols) = payoff.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::dim("matrix game needs at least one row and one column"));
    }
    if payoff.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("payoff", "non-finite entry"));
    }
    let min = payoff.min();
    let shift = 1.0 - min;
    let mut lp = LinearProgram::new(vec![1.0; cols]);
    for i in 0..rows {
        let row = (0..cols).map(|j| payoff[(i, j)] + shift).collect();
        lp = lp.constraint(row, Sense::Le, 1.0);
    }
    let sol = solve_lp(&lp, LP_TOL)?;
    let total: f64 = sol.x.iter().sum();
    let dual_total: f64 = sol.duals.iter().sum();
    if !(total > 0.0) || !(dual_total > 0.0) {
        return Err(Error::Singular(format!(
            "degenerate matrix-game program (sum w = {total}, sum duals = {dual_total})"
        )));
    }
    let strategy2 = DVector::from_iterator(cols, sol.x.iter().map(|w| (w / total).max(0.0)));
    let strategy1 = DVector::from_iterator(rows, sol.duals.iter().map(|y| (y / dual_total).max(0.0)));
    let strategy1 = &strategy1 / strategy1.sum();
    let strategy2 = &strategy2 / strategy2.sum();
    let value = 1.0 / total - shift;

    // the pair must certify the value from both sides; near-duplicate
    // strategies leave the basis badly conditioned, hence the 1e-8 floor
    let row_guarantee = (payoff.transpose() * &strategy1).min();
    let col_guarantee = (payoff * &strategy2).max();
    let scale = 1.0 + payoff.amax();
    let slack = tol.max(1e-8) * scale;
    if row_guarantee < value - slack || col_guarantee > value + slack {
        return Err(Error::NotConverged {
            iterations: sol.pivots,
            residual: (value - row_guarantee).max(col_guarantee - value),
        });
    }
    Ok(MatrixGameSolution {
        strategy1,
        strategy2,
        value,
    })
}

/// Result of Shapley value iteration.
#[derive(Debug, Clone)]
pub struct ShapleyReport {
    pub bipolicy: Bipolicy,
    pub value: ValueFunction,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
}

/// Minimax bipolicy and value of the game under `rewards` (any layout; state-only
/// and state-action rewards are broadcast over the missing actions).
pub fn minimax_bipolicy(
    game: &MarkovGame,
    rewards: &RewardVector,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Bipolicy, ValueFunction)> {
    let report = shapley_iteration(game, rewards, gamma, tol, max_iters)?;
    Ok((report.bipolicy, report.value))
}

/// The auxiliary matrix game `Q_s(a1, a2) = r(s,a1,a2) + gamma E[V(s')]`.
pub fn stage_game(game: &MarkovGame, rewards: &RewardVector, gamma: f64, s: usize, v: &[f64]) -> DMatrix<f64> {
    let m = game.n_actions();
    DMatrix::from_fn(m, m, |a1, a2| {
        rewards.joint(s, a1, a2) + gamma * game.kernel().expect(s, a1, a2, v)
    })
}

pub fn shapley_iteration(
    game: &MarkovGame,
    rewards: &RewardVector,
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ShapleyReport> {
    check_gamma(gamma)?;
    rewards.layout().check_game(game.n_states(), game.n_actions())?;
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let n = game.n_states();
    let m = game.n_actions();
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        let solved: Vec<MatrixGameSolution> = (0..n)
            .into_par_iter()
            .map(|s| solve_matrix_game(&stage_game(game, rewards, gamma, s, &v), LP_TOL))
            .collect::<Result<_>>()?;
        residual = solved
            .iter()
            .zip(&v)
            .map(|(sol, old)| (sol.value - old).abs())
            .fold(0.0, f64::max);
        for (vs, sol) in v.iter_mut().zip(&solved) {
            *vs = sol.value;
        }
        if residual < tol {
            let pi1 = DMatrix::from_fn(n, m, |s, a| solved[s].strategy1[a]);
            let pi2 = DMatrix::from_fn(n, m, |s, a| solved[s].strategy2[a]);
            return Ok(ShapleyReport {
                bipolicy: Bipolicy::new(pi1, pi2)?,
                value: ValueFunction {
                    values: DVector::from_vec(v),
                },
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

/// `V = (I - gamma G_pi)^-1 r_pi` with `r_pi` the per-state expected reward.
pub fn evaluate_bipolicy(
    game: &MarkovGame,
    rewards: &RewardVector,
    bipolicy: &Bipolicy,
    gamma: f64,
) -> Result<ValueFunction> {
    rewards.layout().check_game(game.n_states(), game.n_actions())?;
    let g = build_g(game, bipolicy)?;
    let r = expected_reward(rewards, bipolicy)?;
    let values = Resolvent::new(&g, gamma)?.solve_vec(&r)?;
    Ok(ValueFunction { values })
}

/// Largest value gains available to each player by deviating unilaterally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationAudit {
    /// `max_{l,s} V_{pi1 <- l}(s) - V(s)`: player 1 switching to a stationary pure action.
    pub pinned_gain1: f64,
    /// `max_{l,s} V(s) - V_{pi2 <- l}(s)`.
    pub pinned_gain2: f64,
    /// `max_{l,s} Q(s, l, pi2) - V(s)`: one-step deviations for player 1.
    pub one_step_gain1: f64,
    /// `max_{l,s} V(s) - Q(s, pi1, l)`.
    pub one_step_gain2: f64,
}

impl DeviationAudit {
    pub fn max_pinned_gain(&self) -> f64 {
        self.pinned_gain1.max(self.pinned_gain2)
    }

    pub fn max_gain(&self) -> f64 {
        self.max_pinned_gain()
            .max(self.one_step_gain1)
            .max(self.one_step_gain2)
    }
}

/// Checks how much either player could gain against the other's fixed policy.
pub fn deviation_audit(
    game: &MarkovGame,
    rewards: &RewardVector,
    bipolicy: &Bipolicy,
    gamma: f64,
) -> Result<DeviationAudit> {
    let base = evaluate_bipolicy(game, rewards, bipolicy, gamma)?;
    let m = game.n_actions();
    let n = game.n_states();
    let gains: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|l| -> Result<(f64, f64)> {
            let v1 = evaluate_bipolicy(game, rewards, &bipolicy.with_pure(Player::One, l)?, gamma)?;
            let v2 = evaluate_bipolicy(game, rewards, &bipolicy.with_pure(Player::Two, l)?, gamma)?;
            Ok(((&v1.values - &base.values).max(), (&base.values - &v2.values).max()))
        })
        .collect::<Result<_>>()?;
    let mut audit = DeviationAudit {
        pinned_gain1: gains.iter().map(|g| g.0).fold(f64::NEG_INFINITY, f64::max),
        pinned_gain2: gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max),
        one_step_gain1: f64::NEG_INFINITY,
        one_step_gain2: f64::NEG_INFINITY,
    };
    let v = base.values.as_slice();
    for s in 0..n {
        let q = stage_game(game, rewards, gamma, s, v);
        let p1 = bipolicy.pi1().row(s).transpose();
        let p2 = bipolicy.pi2().row(s).transpose();
        let vs = v[s];
        audit.one_step_gain1 = audit.one_step_gain1.max((&q * &p2).max() - vs);
        audit.one_step_gain2 = audit.one_step_gain2.max(vs - (q.transpose() * &p1).min());
    }
    Ok(audit)
}
