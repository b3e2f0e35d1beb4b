//! Bayesian multi-agent inverse learning: recover player 1's rewards from an
//! observed minimax bipolicy using both players' one-step optimality
//! conditions as hard constraints on a Gaussian prior.
//!
//! State-only rewards, with `X = (I - gamma G_pi)^-1`:
//!
//! ```text
//!     (G_pi - G_{pi2|a1=i}) X r >= 0    for every action i of player 1
//!     (G_pi - G_{pi1|a2=j}) X r <= 0    for every action j of player 2
//! ```
//!
//! Joint-action rewards, with `D_pi = I + gamma P X B_pi`:
//!
//! ```text
//!     (B_{pi2|a1=i} - B_pi) D_pi r <= 0
//!     (B_{pi1|a2=j} - B_pi) D_pi r >= 0
//! ```
//!
//! Since `B_pi P = G_pi`, each joint block is assembled densely as
//! `(B_dev - B_pi) + gamma (G_dev - G_pi) X B_pi` without forming `D_pi`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{check_gamma, MarkovGame, Player};
use crate::layout::{RewardLayout, RewardVector};
use crate::operators::{build_b, build_g, build_g_deviation, PolicyAverager, Resolvent};
use crate::policy::{check_stochastic, Bipolicy};
use crate::solvers::qp::{solve_qp, QpProblem, QpSolution, QpStatus};
use crate::solvers::Sense;

/// Largest number of reward entries for which a dense program is assembled.
pub const MAX_DENSE_UNKNOWNS: usize = 6_000;

/// Default iteration cap of the quadratic program, per unknown.
pub const QP_ITERS_PER_UNKNOWN: usize = 50;

/// Which player deviates and to which pure action, for one block of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockTag {
    pub player: Player,
    pub action: usize,
}

/// Linear constraints `rows[i] . r (sense_i) 0` with one block of `N` rows per deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub rows: DMatrix<f64>,
    pub senses: Vec<Sense>,
    pub blocks: Vec<BlockTag>,
    pub layout: RewardLayout,
}

impl ConstraintSystem {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Signed slack of every row, positive when satisfied strictly.
    pub fn residuals(&self, r: &[f64]) -> Result<DVector<f64>> {
        if r.len() != self.rows.ncols() {
            return Err(Error::dim(format!(
                "constraints have {} columns, reward has {} entries",
                self.rows.ncols(),
                r.len()
            )));
        }
        let ar = &self.rows * DVector::from_column_slice(r);
        Ok(DVector::from_fn(ar.len(), |i, _| match self.senses[i] {
            Sense::Ge => ar[i],
            Sense::Le => -ar[i],
            Sense::Eq => -ar[i].abs(),
        }))
    }

    /// Smallest signed slack; non-negative when `r` is feasible.
    pub fn min_residual(&self, r: &[f64]) -> Result<f64> {
        Ok(self.residuals(r)?.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub(crate) fn vstack(layout: RewardLayout, blocks: Vec<(BlockTag, Sense, DMatrix<f64>)>) -> Self {
        let cols = layout.len();
        let total: usize = blocks.iter().map(|b| b.2.nrows()).sum();
        let mut rows = DMatrix::zeros(total, cols);
        let mut senses = Vec::with_capacity(total);
        let mut tags = Vec::with_capacity(blocks.len());
        let mut at = 0;
        for (tag, sense, block) in blocks {
            let h = block.nrows();
            rows.view_mut((at, 0), (h, cols)).copy_from(&block);
            senses.extend(std::iter::repeat(sense).take(h));
            tags.push(tag);
            at += h;
        }
        Self {
            rows,
            senses,
            blocks: tags,
            layout,
        }
    }
}

/// Rewards recovered by one of the inverse programs, with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub rewards: RewardVector,
    pub solution: QpSolution,
    pub constraints_min_residual: f64,
}

pub(crate) fn check_size(layout: RewardLayout) -> Result<()> {
    if layout.len() > MAX_DENSE_UNKNOWNS {
        return Err(Error::Unsupported(format!(
            "{} program with {} unknowns exceeds the dense limit of {MAX_DENSE_UNKNOWNS}; \
             use a smaller grid",
            layout.name(),
            layout.len()
        )));
    }
    Ok(())
}

/// Zeroes differences of transition probabilities that are pure roundoff.
fn clean(mut d: DMatrix<f64>) -> DMatrix<f64> {
    d.iter_mut().filter(|x| x.abs() < 1e-14).for_each(|x| *x = 0.0);
    d
}

/// Deviation blocks `(G - G_dev) X` for each listed player and each pure action.
pub(crate) fn state_blocks(
    game: &MarkovGame,
    bipolicy: &Bipolicy,
    gamma: f64,
    players: &[Player],
) -> Result<Vec<(BlockTag, DMatrix<f64>)>> {
    check_gamma(gamma)?;
    bipolicy.check_game(game)?;
    let g = build_g(game, bipolicy)?;
    let x = Resolvent::new(&g, gamma)?.inverse()?;
    let tags: Vec<BlockTag> = players
        .iter()
        .flat_map(|&player| (0..game.n_actions()).map(move |action| BlockTag { player, action }))
        .collect();
    tags.into_par_iter()
        .map(|tag| {
            let g_dev = build_g_deviation(game, bipolicy, tag.player, tag.action)?;
            Ok((tag, clean(&g - g_dev) * &x))
        })
        .collect()
}

/// Constraints for state-only rewards, `2 M` blocks of `N` rows.
pub fn state_constraints(game: &MarkovGame, bipolicy: &Bipolicy, gamma: f64) -> Result<ConstraintSystem> {
    let layout = RewardLayout::StateOnly {
        n_states: game.n_states(),
    };
    let blocks = state_blocks(game, bipolicy, gamma, &[Player::One, Player::Two])?
        .into_iter()
        .map(|(tag, m)| {
            let sense = match tag.player {
                Player::One => Sense::Ge,
                Player::Two => Sense::Le,
            };
            (tag, sense, m)
        })
        .collect();
    Ok(ConstraintSystem::vstack(layout, blocks))
}

/// Constraints for joint-action rewards, `2 M` blocks of `N` rows.
pub fn joint_constraints(game: &MarkovGame, bipolicy: &Bipolicy, gamma: f64) -> Result<ConstraintSystem> {
    check_gamma(gamma)?;
    bipolicy.check_game(game)?;
    let layout = game.joint_layout();
    check_size(layout)?;
    let g = build_g(game, bipolicy)?;
    let resolvent = Resolvent::new(&g, gamma)?;
    let b = build_b(bipolicy);
    let xb = resolvent.solve(&b.to_dense())?;
    let tags: Vec<BlockTag> = [Player::One, Player::Two]
        .iter()
        .flat_map(|&player| (0..game.n_actions()).map(move |action| BlockTag { player, action }))
        .collect();
    let blocks = tags
        .into_par_iter()
        .map(|tag| {
            let dev = bipolicy.with_pure(tag.player, tag.action)?;
            let b_dev: PolicyAverager = build_b(&dev);
            let g_dev = build_g(game, &dev)?;
            let block = b_dev.difference_dense(&b)? + (clean(g_dev - &g) * &xb) * gamma;
            let sense = match tag.player {
                Player::One => Sense::Le,
                Player::Two => Sense::Ge,
            };
            Ok((tag, sense, block))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintSystem::vstack(layout, blocks))
}

/// Solves the prior-restricted-to-feasible-set program over `constraints`.
pub fn solve_recovery(
    constraints: &ConstraintSystem,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    tol: f64,
) -> Result<Recovery> {
    let layout = constraints.layout;
    if mu.len() != layout.len() {
        return Err(Error::dim(format!(
            "prior mean has {} entries, {} layout needs {}",
            mu.len(),
            layout.name(),
            layout.len()
        )));
    }
    let problem = QpProblem::new(
        mu.clone(),
        sigma.clone(),
        constraints.rows.clone(),
        constraints.senses.clone(),
    )?;
    let max_iters = QP_ITERS_PER_UNKNOWN * (layout.len() + constraints.n_rows()).max(1);
    let solution = solve_qp(&problem, tol, max_iters)?;
    match solution.status {
        QpStatus::Infeasible => {
            return Err(Error::QpFailed {
                status: "infeasible",
                detail: format!("{} program has no feasible reward", layout.name()),
            })
        }
        QpStatus::MaxIter => {
            return Err(Error::QpFailed {
                status: "max_iter",
                detail: format!(
                    "stopped after {} iterations, kkt residual {:.3e}",
                    solution.iterations, solution.kkt_residual
                ),
            })
        }
        QpStatus::Optimal | QpStatus::Inaccurate => {}
    }
    let rewards = RewardVector::new(layout, solution.r.iter().copied().collect())?;
    let constraints_min_residual = constraints.min_residual(rewards.values())?;
    Ok(Recovery {
        rewards,
        solution,
        constraints_min_residual,
    })
}

/// Recovers state-only rewards from both players' deviation conditions.
pub fn recover_state_rewards(
    game: &MarkovGame,
    observed: &Bipolicy,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
) -> Result<Recovery> {
    check_size(RewardLayout::StateOnly {
        n_states: game.n_states(),
    })?;
    let constraints = state_constraints(game, observed, gamma)?;
    solve_recovery(&constraints, mu, sigma, tol)
}

/// Recovers joint-action rewards from both players' deviation conditions.
pub fn recover_joint_rewards(
    game: &MarkovGame,
    observed: &Bipolicy,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
) -> Result<Recovery> {
    let constraints = joint_constraints(game, observed, gamma)?;
    solve_recovery(&constraints, mu, sigma, tol)
}

/// Player 1's rewards against a fixed `pi2`: `r(s,a1) = sum_a2 r(s,a1,a2) pi2(s,a2)`.
pub fn marginalize_rewards(r_joint: &RewardVector, pi2: &DMatrix<f64>) -> Result<RewardVector> {
    let RewardLayout::StateJointAction {
        n_states,
        n_actions,
    } = r_joint.layout()
    else {
        return Err(Error::dim(format!(
            "marginalization needs joint-action rewards, got {}",
            r_joint.layout().name()
        )));
    };
    if pi2.shape() != (n_states, n_actions) {
        return Err(Error::dim(format!(
            "pi2 is {:?}, rewards are over {n_states} states and {n_actions} actions",
            pi2.shape()
        )));
    }
    check_stochastic(pi2, "pi2")?;
    let layout = RewardLayout::StateAction {
        n_states,
        n_actions,
    };
    let mut out = vec![0.0; layout.len()];
    for s in 0..n_states {
        for a1 in 0..n_actions {
            out[layout.index(s, a1, 0)] = (0..n_actions)
                .map(|a2| r_joint.joint(s, a1, a2) * pi2[(s, a2)])
                .sum();
        }
    }
    RewardVector::new(layout, out)
}
