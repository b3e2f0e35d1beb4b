//! Matrix operators built from a game and a bipolicy.
//!
//! * `G_pi` (N x N): state transitions under the bipolicy.
//! * `G_pi|a^k=l`: same, with player `k` pinned to action `l` everywhere.
//! * `B_pi` (N x NM^2): per-state expected reward of joint-action rewards.
//! * `P` (NM^2 x N): the kernel, one row per `(s, a1, a2)` in joint layout order.
//! * `D_pi = I + gamma P (I - gamma G_pi)^-1 B_pi`, applied matrix-free.
//! * `C_pi1` (N x NM): per-state expected reward of state-action rewards.
//! * `F_i = [gamma (G_pi - G_pi2|a1=i)(I - gamma G_pi)^-1 + I] C_pi1`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::game::{check_gamma, MarkovGame, Player};
use crate::layout::{RewardLayout, RewardVector};
use crate::policy::Bipolicy;

/// Relative residual allowed when solving with `I - gamma G`.
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-10;

/// Largest joint-reward dimension for which `D_pi` may be materialized.
pub const DENSE_D_LIMIT: usize = 2_000;

pub fn build_g(game: &MarkovGame, bipolicy: &Bipolicy) -> Result<DMatrix<f64>> {
    bipolicy.check_game(game)?;
    let n = game.n_states();
    let m = game.n_actions();
    let (pi1, pi2) = (bipolicy.pi1(), bipolicy.pi2());
    let kernel = game.kernel();
    let mut g = DMatrix::zeros(n, n);
    for s in 0..n {
        for a1 in 0..m {
            let w1 = pi1[(s, a1)];
            if w1 == 0.0 {
                continue;
            }
            for a2 in 0..m {
                let w = w1 * pi2[(s, a2)];
                if w == 0.0 {
                    continue;
                }
                let (t, p) = kernel.row(s, a1, a2);
                for (&j, &q) in t.iter().zip(p) {
                    g[(s, j)] += w * q;
                }
            }
        }
    }
    Ok(g)
}

/// Transition matrix when `player` always plays `action` and the other player keeps its policy.
pub fn build_g_deviation(
    game: &MarkovGame,
    bipolicy: &Bipolicy,
    player: Player,
    action: usize,
) -> Result<DMatrix<f64>> {
    game.check_action(action)?;
    build_g(game, &bipolicy.with_pure(player, action)?)
}

/// A sparse `N x (N K)` averaging operator. Column `j * N + s` of row `s`
/// holds `weights[(s, j)]`; every other entry is zero.
///
/// With `K = M^2` and weights `pi1(s,a1) pi2(s,a2)` this is `B_pi`; with
/// `K = M` and weights `pi1(s,a)` it is `C_pi1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAverager {
    weights: DMatrix<f64>,
}

impl PolicyAverager {
    pub fn n_states(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.weights.nrows() * self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn apply(&self, r: &[f64]) -> Result<DVector<f64>> {
        if r.len() != self.n_cols() {
            return Err(Error::dim(format!(
                "averager expects {} entries, got {}",
                self.n_cols(),
                r.len()
            )));
        }
        let n = self.n_states();
        Ok(DVector::from_fn(n, |s, _| {
            self.weights
                .row(s)
                .iter()
                .enumerate()
                .map(|(j, w)| w * r[j * n + s])
                .sum()
        }))
    }

    /// `Y * self` for a `R x N` matrix `Y`.
    pub fn right_mul(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_states();
        if y.ncols() != n {
            return Err(Error::dim(format!(
                "left factor has {} columns, averager has {n} rows",
                y.ncols()
            )));
        }
        let k = self.weights.ncols();
        let mut out = DMatrix::zeros(y.nrows(), n * k);
        for j in 0..k {
            for s in 0..n {
                let w = self.weights[(s, j)];
                if w != 0.0 {
                    let mut col = out.column_mut(j * n + s);
                    col.axpy(w, &y.column(s), 0.0);
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut out = DMatrix::zeros(n, self.n_cols());
        for s in 0..n {
            for j in 0..self.weights.ncols() {
                out[(s, j * n + s)] = self.weights[(s, j)];
            }
        }
        out
    }

    /// `self_a - self_b` as a dense matrix (both must have the same shape).
    pub fn difference_dense(&self, other: &PolicyAverager) -> Result<DMatrix<f64>> {
        if self.weights.shape() != other.weights.shape() {
            return Err(Error::dim("averager shapes differ"));
        }
        let diff = PolicyAverager {
            weights: &self.weights - &other.weights,
        };
        Ok(diff.to_dense())
    }
}

pub fn build_b(bipolicy: &Bipolicy) -> PolicyAverager {
    let n = bipolicy.n_states();
    let m = bipolicy.n_actions();
    let (pi1, pi2) = (bipolicy.pi1(), bipolicy.pi2());
    let weights = DMatrix::from_fn(n, m * m, |s, j| pi1[(s, j / m)] * pi2[(s, j % m)]);
    PolicyAverager { weights }
}

pub fn build_b_deviation(bipolicy: &Bipolicy, player: Player, action: usize) -> Result<PolicyAverager> {
    Ok(build_b(&bipolicy.with_pure(player, action)?))
}

/// `C_pi1`: row `s` holds `pi1(s, a)` at column `a * N + s`.
pub fn build_c(pi1: &DMatrix<f64>) -> Result<PolicyAverager> {
    crate::policy::check_stochastic(pi1, "pi1")?;
    Ok(PolicyAverager {
        weights: pi1.clone(),
    })
}

/// `C_{a1=i}`: selects action `i` in every state.
pub fn build_c_pure(n_states: usize, n_actions: usize, action: usize) -> Result<PolicyAverager> {
    if action >= n_actions {
        return Err(Error::OutOfRange {
            what: "action",
            index: action,
            limit: n_actions,
        });
    }
    let mut weights = DMatrix::zeros(n_states, n_actions);
    weights.column_mut(action).fill(1.0);
    Ok(PolicyAverager { weights })
}

/// Dense `(N M^2) x N` kernel matrix in joint layout row order.
pub fn build_p(game: &MarkovGame) -> DMatrix<f64> {
    let n = game.n_states();
    let m = game.n_actions();
    let layout = game.joint_layout();
    let mut p = DMatrix::zeros(layout.len(), n);
    for s in 0..n {
        for a1 in 0..m {
            for a2 in 0..m {
                let row = layout.index(s, a1, a2);
                let (t, q) = game.kernel().row(s, a1, a2);
                for (&j, &v) in t.iter().zip(q) {
                    p[(row, j)] = v;
                }
            }
        }
    }
    p
}

/// `P v`: expected successor value for every `(s, a1, a2)` in joint layout order.
pub fn apply_p(game: &MarkovGame, v: &[f64]) -> DVector<f64> {
    let n = game.n_states();
    let m = game.n_actions();
    let layout = game.joint_layout();
    let mut out = DVector::zeros(layout.len());
    for s in 0..n {
        for a1 in 0..m {
            for a2 in 0..m {
                out[layout.index(s, a1, a2)] = game.kernel().expect(s, a1, a2, v);
            }
        }
    }
    out
}

/// LU factorization of `I - gamma G` with residual-checked solves.
pub struct Resolvent {
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl Resolvent {
    pub fn new(g: &DMatrix<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !g.is_square() {
            return Err(Error::dim("transition matrix must be square"));
        }
        let n = g.nrows();
        let matrix = DMatrix::identity(n, n) - g * gamma;
        let lu = matrix.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(format!(
                "I - gamma G is singular (n = {n}, gamma = {gamma})"
            )));
        }
        Ok(Self { matrix, lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solves `(I - gamma G) x = b` for each column of `b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self
            .lu
            .solve(b)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
        let resid = (&self.matrix * &x - b).amax();
        let scale = 1.0 + b.amax().max(x.amax());
        if resid > RESOLVENT_RESIDUAL_TOL * scale {
            return Err(Error::Singular(format!(
                "residual {resid:.3e} exceeds {RESOLVENT_RESIDUAL_TOL:.0e} (scale {scale:.3e})"
            )));
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.solve(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    /// `(I - gamma G)^-1` as a dense matrix.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.solve(&DMatrix::identity(self.dim(), self.dim()))
    }
}

/// `D_pi = I + gamma P (I - gamma G_pi)^-1 B_pi` as a linear operator on joint-action rewards.
pub struct DOperator<'a> {
    game: &'a MarkovGame,
    gamma: f64,
    b: PolicyAverager,
    resolvent: Resolvent,
}

pub fn build_d<'a>(game: &'a MarkovGame, bipolicy: &Bipolicy, gamma: f64) -> Result<DOperator<'a>> {
    let g = build_g(game, bipolicy)?;
    let resolvent = Resolvent::new(&g, gamma)?;
    Ok(DOperator {
        game,
        gamma,
        b: build_b(bipolicy),
        resolvent,
    })
}

impl DOperator<'_> {
    pub fn dim(&self) -> usize {
        self.b.n_cols()
    }

    pub fn apply(&self, r: &[f64]) -> Result<DVector<f64>> {
        let br = self.b.apply(r)?;
        let v = self.resolvent.solve_vec(&br)?;
        let pv = apply_p(self.game, v.as_slice());
        Ok(DVector::from_column_slice(r) + pv * self.gamma)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if d > DENSE_D_LIMIT {
            return Err(Error::Unsupported(format!(
                "dense D_pi of dimension {d} exceeds the limit of {DENSE_D_LIMIT}"
            )));
        }
        let xb = self.resolvent.solve(&self.b.to_dense())?;
        let p = build_p(self.game);
        Ok(DMatrix::identity(d, d) + (p * xb) * self.gamma)
    }
}

/// `F_{a1=i}`, an `N x (N M)` matrix.
pub fn build_f(
    game: &MarkovGame,
    bipolicy: &Bipolicy,
    action: usize,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let g = build_g(game, bipolicy)?;
    let resolvent = Resolvent::new(&g, gamma)?;
    let x = resolvent.inverse()?;
    build_f_with(game, bipolicy, action, gamma, &g, &x)
}

/// [`build_f`] reusing a precomputed `G_pi` and `(I - gamma G_pi)^-1`.
pub(crate) fn build_f_with(
    game: &MarkovGame,
    bipolicy: &Bipolicy,
    action: usize,
    gamma: f64,
    g: &DMatrix<f64>,
    resolvent_inv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = game.n_states();
    let g_dev = build_g_deviation(game, bipolicy, Player::One, action)?;
    let mut inner = ((g - g_dev) * resolvent_inv) * gamma;
    for s in 0..n {
        inner[(s, s)] += 1.0;
    }
    build_c(bipolicy.pi1())?.right_mul(&inner)
}

/// Per-state expected immediate reward of player 1 under a bipolicy.
pub fn expected_reward(rewards: &RewardVector, bipolicy: &Bipolicy) -> Result<DVector<f64>> {
    let n = bipolicy.n_states();
    let m = bipolicy.n_actions();
    match rewards.layout() {
        RewardLayout::StateOnly { n_states } if n_states == n => {
            Ok(DVector::from_column_slice(rewards.values()))
        }
        RewardLayout::StateAction {
            n_states,
            n_actions,
        } if n_states == n && n_actions == m => build_c(bipolicy.pi1())?.apply(rewards.values()),
        RewardLayout::StateJointAction {
            n_states,
            n_actions,
        } if n_states == n && n_actions == m => build_b(bipolicy).apply(rewards.values()),
        other => Err(Error::dim(format!(
            "{other:?} incompatible with a {n}x{m} bipolicy"
        ))),
    }
}
