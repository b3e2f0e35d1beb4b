//! Single-agent Bayesian inverse learning on the MDP that player 1 faces when
//! player 2's policy is held fixed.
//!
//! With `r` the state-action rewards of player 1 (action-major layout),
//! `X = (I - gamma G_pi)^-1` and
//! `F_i = [gamma (G_pi - G_{pi2|a1=i}) X + I] C_pi1`, the observed `pi1` is
//! optimal exactly when
//!
//! ```text
//!     (F_i - C_{a1=i}) r >= 0    for every action i.
//! ```
//!
//! The likelihood is the 0/1 indicator of these constraints, so the posterior
//! mode is the prior mean projected onto the feasible set.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{check_gamma, MarkovGame, Player};
use crate::layout::{RewardLayout, RewardVector};
use crate::mirl::{check_size, solve_recovery, BlockTag, ConstraintSystem, Recovery};
use crate::operators::{build_c_pure, build_f_with, build_g, build_g_deviation, Resolvent};
use crate::policy::{check_stochastic, Bipolicy};
use crate::soccer::{Possession, SoccerGame};
use crate::solvers::Sense;

/// Player 1's MDP: `p(s'|s,a1) = sum_a2 pi2(s,a2) p(s'|s,a1,a2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp {
    /// One `N x N` transition matrix per action of player 1.
    transitions: Vec<DMatrix<f64>>,
    gamma: f64,
}

pub fn induce_mdp(game: &MarkovGame, pi2: &DMatrix<f64>, gamma: f64) -> Result<InducedMdp> {
    check_gamma(gamma)?;
    if pi2.shape() != (game.n_states(), game.n_actions()) {
        return Err(Error::dim(format!(
            "pi2 is {:?}, game has {} states and {} actions",
            pi2.shape(),
            game.n_states(),
            game.n_actions()
        )));
    }
    check_stochastic(pi2, "pi2")?;
    // player 1's side is replaced by each pure action in turn
    let bp = Bipolicy::new(pi2.clone(), pi2.clone())?;
    let transitions = (0..game.n_actions())
        .into_par_iter()
        .map(|a| build_g_deviation(game, &bp, Player::One, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(InducedMdp { transitions, gamma })
}

impl InducedMdp {
    pub fn n_states(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Transition matrix of action `a`.
    pub fn transition(&self, a: usize) -> &DMatrix<f64> {
        &self.transitions[a]
    }

    fn layout(&self) -> RewardLayout {
        RewardLayout::StateAction {
            n_states: self.n_states(),
            n_actions: self.n_actions(),
        }
    }

    fn check_rewards(&self, rewards: &RewardVector) -> Result<()> {
        rewards.layout().check_game(self.n_states(), self.n_actions())?;
        if matches!(rewards.layout(), RewardLayout::StateJointAction { .. }) {
            return Err(Error::dim(
                "the induced MDP takes state or state-action rewards",
            ));
        }
        Ok(())
    }

    /// `Q(s, a) = r(s, a) + gamma sum_s' p(s'|s,a) V(s')` as an `N x M` matrix.
    pub fn q_values(&self, rewards: &RewardVector, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_rewards(rewards)?;
        let n = self.n_states();
        let mut q = DMatrix::zeros(n, self.n_actions());
        for (a, p) in self.transitions.iter().enumerate() {
            let next = p * v;
            for s in 0..n {
                q[(s, a)] = rewards.joint(s, a, 0) + self.gamma * next[s];
            }
        }
        Ok(q)
    }

    /// Value of a stationary (possibly mixed) policy.
    pub fn evaluate(&self, rewards: &RewardVector, policy: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_rewards(rewards)?;
        let n = self.n_states();
        if policy.shape() != (n, self.n_actions()) {
            return Err(Error::dim("policy shape does not match the MDP"));
        }
        check_stochastic(policy, "policy")?;
        let mut g = DMatrix::zeros(n, n);
        let mut r = DVector::zeros(n);
        for (a, p) in self.transitions.iter().enumerate() {
            for s in 0..n {
                let w = policy[(s, a)];
                if w != 0.0 {
                    for j in 0..n {
                        g[(s, j)] += w * p[(s, j)];
                    }
                    r[s] += w * rewards.joint(s, a, 0);
                }
            }
        }
        Resolvent::new(&g, self.gamma)?.solve_vec(&r)
    }

    /// Optimal values and a greedy deterministic policy (lowest action index on ties).
    pub fn solve(&self, rewards: &RewardVector, tol: f64, max_iters: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_rewards(rewards)?;
        let n = self.n_states();
        let mut v = DVector::zeros(n);
        let mut residual = f64::INFINITY;
        for _ in 0..max_iters {
            let q = self.q_values(rewards, &v)?;
            let next = DVector::from_fn(n, |s, _| q.row(s).max());
            residual = (&next - &v).amax();
            v = next;
            if residual < tol {
                let q = self.q_values(rewards, &v)?;
                let mut policy = DMatrix::zeros(n, self.n_actions());
                for s in 0..n {
                    let best = (0..self.n_actions())
                        .fold(0, |b, a| if q[(s, a)] > q[(s, b)] { a } else { b });
                    policy[(s, best)] = 1.0;
                }
                return Ok((policy, v));
            }
        }
        Err(Error::NotConverged {
            iterations: max_iters,
            residual,
        })
    }

    /// `max_{s,a} Q_pi(s,a) - V_pi(s)`: what one step of policy improvement gains.
    pub fn improvement_gain(&self, rewards: &RewardVector, policy: &DMatrix<f64>) -> Result<f64> {
        let v = self.evaluate(rewards, policy)?;
        let q = self.q_values(rewards, &v)?;
        let mut gain = f64::NEG_INFINITY;
        for s in 0..self.n_states() {
            gain = gain.max(q.row(s).max() - v[s]);
        }
        Ok(gain)
    }

    pub fn reward_layout(&self) -> RewardLayout {
        self.layout()
    }
}

/// The `M` blocks `F_i - C_{a1=i}` over state-action rewards.
pub fn irl_constraints(game: &MarkovGame, bipolicy: &Bipolicy, gamma: f64) -> Result<ConstraintSystem> {
    check_gamma(gamma)?;
    bipolicy.check_game(game)?;
    let n = game.n_states();
    let m = game.n_actions();
    let layout = RewardLayout::StateAction {
        n_states: n,
        n_actions: m,
    };
    check_size(layout)?;
    let g = build_g(game, bipolicy)?;
    let x = Resolvent::new(&g, gamma)?.inverse()?;
    let blocks = (0..m)
        .into_par_iter()
        .map(|i| {
            let f = build_f_with(game, bipolicy, i, gamma, &g, &x)?;
            let c = build_c_pure(n, m, i)?.to_dense();
            let tag = BlockTag {
                player: Player::One,
                action: i,
            };
            Ok((tag, Sense::Ge, f - c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintSystem::vstack(layout, blocks))
}

/// The same conditions for rewards that depend on the state only: each block
/// is `(F_i - C_{a1=i}) L` where `L` copies a state reward to every action.
pub fn irl_state_constraints(game: &MarkovGame, bipolicy: &Bipolicy, gamma: f64) -> Result<ConstraintSystem> {
    let full = irl_constraints(game, bipolicy, gamma)?;
    let n = game.n_states();
    let m = game.n_actions();
    let mut rows = DMatrix::zeros(full.n_rows(), n);
    for a in 0..m {
        rows += full.rows.columns(a * n, n);
    }
    Ok(ConstraintSystem {
        rows,
        senses: full.senses,
        blocks: full.blocks,
        layout: RewardLayout::StateOnly { n_states: n },
    })
}

/// Recovers player 1's state-action rewards from the observed bipolicy.
pub fn recover_irl_rewards(
    game: &MarkovGame,
    observed: &Bipolicy,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
) -> Result<Recovery> {
    let constraints = irl_constraints(game, observed, gamma)?;
    solve_recovery(&constraints, mu, sigma, tol)
}

/// Recovers state-only rewards with the single-agent conditions.
pub fn recover_irl_state_rewards(
    game: &MarkovGame,
    observed: &Bipolicy,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
) -> Result<Recovery> {
    let constraints = irl_state_constraints(game, observed, gamma)?;
    solve_recovery(&constraints, mu, sigma, tol)
}

/// Per-square estimates of the probability of a successful shot.
#[derive(Debug, Clone, PartialEq)]
pub struct PssEstimate {
    /// Square numbers, 1-based.
    pub squares: Vec<usize>,
    pub estimate_a: Vec<f64>,
    pub truth_a: Vec<f64>,
    /// B's estimates need B's action in the layout, so joint rewards only.
    pub estimate_b: Option<Vec<f64>>,
    pub truth_b: Vec<f64>,
}

impl PssEstimate {
    pub fn mae_a(&self) -> f64 {
        mae(&self.estimate_a, &self.truth_a)
    }

    pub fn mae_b(&self) -> Option<f64> {
        self.estimate_b.as_ref().map(|e| mae(e, &self.truth_b))
    }
}

/// Mean computed relative to the first value, so equal inputs average exactly.
fn exact_mean(v: &[f64]) -> f64 {
    let Some(&first) = v.first() else {
        return f64::NAN;
    };
    first + v.iter().map(|x| x - first).sum::<f64>() / v.len() as f64
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Averages the shoot rewards over all states in which the shooter holds the
/// ball on each square. For A this is `r(s, shoot, .)`, averaged over B's
/// action in the joint layout; for B it is `-r(s, ., shoot)` averaged over A's.
pub fn extract_pss(rewards: &RewardVector, soccer: &SoccerGame) -> Result<PssEstimate> {
    let Some(shoot) = soccer.shoot_action() else {
        return Err(Error::Unsupported("the game has no shoot action".into()));
    };
    let (table_a, table_b) = soccer.pss().expect("shoot variant carries PSS tables");
    let layout = rewards.layout();
    layout.check_game(soccer.n_states(), soccer.n_actions())?;
    let m = soccer.n_actions();
    let joint = match layout {
        RewardLayout::StateJointAction { .. } => true,
        RewardLayout::StateAction { .. } => false,
        RewardLayout::StateOnly { .. } => {
            return Err(Error::dim("state-only rewards carry no shoot entries"));
        }
    };
    let n_sq = soccer.grid().n_squares();
    let mut vals_a: Vec<Vec<f64>> = vec![Vec::new(); n_sq];
    let mut vals_b: Vec<Vec<f64>> = vec![Vec::new(); n_sq];
    for s in 0..soccer.n_states() {
        let st = soccer.decode(s)?;
        match st.possession {
            Possession::A if joint => {
                vals_a[st.pos_a - 1].extend((0..m).map(|a2| rewards.joint(s, shoot, a2)));
            }
            Possession::A => vals_a[st.pos_a - 1].push(rewards.joint(s, shoot, 0)),
            Possession::B if joint => {
                vals_b[st.pos_b - 1].extend((0..m).map(|a1| -rewards.joint(s, a1, shoot)));
            }
            Possession::B => {}
        }
    }
    Ok(PssEstimate {
        squares: (1..=n_sq).collect(),
        estimate_a: vals_a.iter().map(|v| exact_mean(v)).collect(),
        truth_a: table_a.values().to_vec(),
        estimate_b: joint.then(|| vals_b.iter().map(|v| exact_mean(v)).collect()),
        truth_b: table_b.values().to_vec(),
    })
}
