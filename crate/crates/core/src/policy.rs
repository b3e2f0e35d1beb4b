use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::game::{MarkovGame, Player};

/// Row sums of policy matrices must match 1 within this tolerance.
pub const POLICY_TOL: f64 = 1e-9;

/// Both players' stationary mixed strategies, one `N x M` row-stochastic matrix each.
#[derive(Debug, Clone, PartialEq)]
pub struct Bipolicy {
    pi1: DMatrix<f64>,
    pi2: DMatrix<f64>,
}

impl Bipolicy {
    pub fn new(pi1: DMatrix<f64>, pi2: DMatrix<f64>) -> Result<Self> {
        if pi1.shape() != pi2.shape() {
            return Err(Error::dim(format!(
                "policy shapes differ: {:?} vs {:?}",
                pi1.shape(),
                pi2.shape()
            )));
        }
        check_stochastic(&pi1, "pi1")?;
        check_stochastic(&pi2, "pi2")?;
        Ok(Self { pi1, pi2 })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64);
        Self {
            pi1: p.clone(),
            pi2: p,
        }
    }

    /// Deterministic bipolicy from per-state action choices.
    pub fn pure(n_actions: usize, a1: &[usize], a2: &[usize]) -> Result<Self> {
        Self::new(one_hot(n_actions, a1)?, one_hot(n_actions, a2)?)
    }

    pub fn n_states(&self) -> usize {
        self.pi1.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.pi1.ncols()
    }

    pub fn pi1(&self) -> &DMatrix<f64> {
        &self.pi1
    }

    pub fn pi2(&self) -> &DMatrix<f64> {
        &self.pi2
    }

    pub fn policy(&self, player: Player) -> &DMatrix<f64> {
        match player {
            Player::One => &self.pi1,
            Player::Two => &self.pi2,
        }
    }

    /// Copy in which `player` always takes `action`.
    pub fn with_pure(&self, player: Player, action: usize) -> Result<Bipolicy> {
        if action >= self.n_actions() {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                limit: self.n_actions(),
            });
        }
        let mut pure = DMatrix::zeros(self.n_states(), self.n_actions());
        pure.column_mut(action).fill(1.0);
        Ok(match player {
            Player::One => Bipolicy {
                pi1: pure,
                pi2: self.pi2.clone(),
            },
            Player::Two => Bipolicy {
                pi1: self.pi1.clone(),
                pi2: pure,
            },
        })
    }

    /// Replaces one side, keeping the other.
    pub fn with_policy(&self, player: Player, policy: DMatrix<f64>) -> Result<Bipolicy> {
        match player {
            Player::One => Bipolicy::new(policy, self.pi2.clone()),
            Player::Two => Bipolicy::new(self.pi1.clone(), policy),
        }
    }

    pub fn check_game(&self, game: &MarkovGame) -> Result<()> {
        if self.n_states() != game.n_states() || self.n_actions() != game.n_actions() {
            return Err(Error::dim(format!(
                "bipolicy is {}x{}, game has {} states and {} actions",
                self.n_states(),
                self.n_actions(),
                game.n_states(),
                game.n_actions()
            )));
        }
        Ok(())
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_abs_diff(&self, other: &Bipolicy) -> f64 {
        let d1 = (&self.pi1 - &other.pi1).amax();
        let d2 = (&self.pi2 - &other.pi2).amax();
        d1.max(d2)
    }
}

fn one_hot(n_actions: usize, choice: &[usize]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(choice.len(), n_actions);
    for (s, &a) in choice.iter().enumerate() {
        if a >= n_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                limit: n_actions,
            });
        }
        m[(s, a)] = 1.0;
    }
    Ok(m)
}

pub(crate) fn check_stochastic(p: &DMatrix<f64>, name: &str) -> Result<()> {
    if p.ncols() == 0 {
        return Err(Error::dim(format!("{name} has no actions")));
    }
    for (s, row) in p.row_iter().enumerate() {
        if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::NotStochastic(format!(
                "{name} row {s} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > POLICY_TOL {
            return Err(Error::NotStochastic(format!("{name} row {s} sums to {sum}")));
        }
    }
    Ok(())
}
