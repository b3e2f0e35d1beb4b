//! Generic finite two-player zero-sum discounted stochastic games.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{RewardLayout, RewardVector};

/// Row sums of every kernel row must match 1 within this tolerance.
pub const KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Sparse transition kernel `p(s' | s, a1, a2)` stored row-compressed.
///
/// Row `(s * M + a1) * M + a2` lists the reachable successors in increasing
/// state order with strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n_states: usize,
    n_actions: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
}

/// One `(s, a1, a2, s', p)` entry of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry(pub usize, pub usize, pub usize, pub usize, pub f64);

impl TransitionKernel {
    /// Builds a kernel by querying `f(s, a1, a2)` for the successor distribution.
    ///
    /// Duplicate successors are merged and zero entries dropped.
    pub fn from_fn<F>(n_states: usize, n_actions: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Vec<(usize, f64)>,
    {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("kernel", "need at least one state and one action"));
        }
        let rows = n_states * n_actions * n_actions;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for s in 0..n_states {
            for a1 in 0..n_actions {
                for a2 in 0..n_actions {
                    let mut row = f(s, a1, a2);
                    row.sort_by_key(|&(t, _)| t);
                    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                    for (t, p) in row {
                        if t >= n_states {
                            return Err(Error::OutOfRange {
                                what: "successor state",
                                index: t,
                                limit: n_states,
                            });
                        }
                        if !(p >= 0.0) || !p.is_finite() {
                            return Err(Error::NotStochastic(format!(
                                "negative or non-finite probability {p} in row ({s},{a1},{a2})"
                            )));
                        }
                        match merged.last_mut() {
                            Some(last) if last.0 == t => last.1 += p,
                            _ => merged.push((t, p)),
                        }
                    }
                    let total: f64 = merged.iter().map(|e| e.1).sum();
                    if (total - 1.0).abs() > KERNEL_TOL {
                        return Err(Error::NotStochastic(format!(
                            "kernel row ({s},{a1},{a2}) sums to {total}"
                        )));
                    }
                    for (t, p) in merged {
                        if p > 0.0 {
                            targets.push(t);
                            probs.push(p);
                        }
                    }
                    offsets.push(targets.len());
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            offsets,
            targets,
            probs,
        })
    }

    /// Builds a kernel from an explicit triplet list; missing rows are an error.
    pub fn from_entries(n_states: usize, n_actions: usize, entries: &[KernelEntry]) -> Result<Self> {
        let rows = n_states * n_actions * n_actions;
        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &KernelEntry(s, a1, a2, t, p) in entries {
            if s >= n_states || a1 >= n_actions || a2 >= n_actions {
                return Err(Error::OutOfRange {
                    what: "kernel entry",
                    index: s.max(a1).max(a2),
                    limit: n_states,
                });
            }
            buckets[(s * n_actions + a1) * n_actions + a2].push((t, p));
        }
        Self::from_fn(n_states, n_actions, |s, a1, a2| {
            std::mem::take(&mut buckets[(s * n_actions + a1) * n_actions + a2])
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn row_id(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions + a1) * self.n_actions + a2
    }

    /// Successor states and probabilities for `(s, a1, a2)`.
    #[inline]
    pub fn row(&self, s: usize, a1: usize, a2: usize) -> (&[usize], &[f64]) {
        let r = self.row_id(s, a1, a2);
        let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
        (&self.targets[lo..hi], &self.probs[lo..hi])
    }

    /// Expected value of `v` at the successor of `(s, a1, a2)`.
    #[inline]
    pub fn expect(&self, s: usize, a1: usize, a2: usize, v: &[f64]) -> f64 {
        let (t, p) = self.row(s, a1, a2);
        t.iter().zip(p).map(|(&j, &q)| q * v[j]).sum()
    }

    pub fn entries(&self) -> Vec<KernelEntry> {
        let mut out = Vec::with_capacity(self.targets.len());
        for s in 0..self.n_states {
            for a1 in 0..self.n_actions {
                for a2 in 0..self.n_actions {
                    let (t, p) = self.row(s, a1, a2);
                    out.extend(t.iter().zip(p).map(|(&j, &q)| KernelEntry(s, a1, a2, j, q)));
                }
            }
        }
        out
    }
}

/// A two-player zero-sum discounted stochastic game.
///
/// Immutable once built; rewards are player 1's.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    kernel: TransitionKernel,
    rewards: RewardVector,
    gamma: f64,
}

impl MarkovGame {
    pub fn new(kernel: TransitionKernel, rewards: RewardVector, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        rewards
            .layout()
            .check_game(kernel.n_states(), kernel.n_actions())?;
        Ok(Self {
            kernel,
            rewards,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn rewards(&self) -> &RewardVector {
        &self.rewards
    }

    pub fn joint_layout(&self) -> RewardLayout {
        RewardLayout::StateJointAction {
            n_states: self.n_states(),
            n_actions: self.n_actions(),
        }
    }

    /// Same dynamics, different rewards.
    pub fn with_rewards(&self, rewards: RewardVector) -> Result<Self> {
        Self::new(self.kernel.clone(), rewards, self.gamma)
    }

    /// Dense successor distribution of `(s, a1, a2)`.
    pub fn transition_dist(&self, s: usize, a1: usize, a2: usize) -> Result<Vec<f64>> {
        self.check_state(s)?;
        self.check_action(a1)?;
        self.check_action(a2)?;
        let mut out = vec![0.0; self.n_states()];
        let (t, p) = self.kernel.row(s, a1, a2);
        for (&j, &q) in t.iter().zip(p) {
            out[j] = q;
        }
        Ok(out)
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "state",
                index: s,
                limit: self.n_states(),
            })
        }
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a < self.n_actions() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "action",
                index: a,
                limit: self.n_actions(),
            })
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::param("gamma", format!("{gamma} is not in [0, 1)")))
    }
}
