//! Flat reward vectors and the one indexing rule shared by every operator.
//!
//! Three layouts exist:
//!
//! * `StateOnly`: index `s`, length `N`.
//! * `StateAction`: action-major, index `a1 * N + s`, length `N * M`.
//! * `StateJointAction`: index `(a1 * M + a2) * N + s`, length `N * M * M`.
//!
//! All indices are zero-based. Rewards are always those of player 1; player 2
//! receives the negation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardLayout {
    StateOnly { n_states: usize },
    StateAction { n_states: usize, n_actions: usize },
    StateJointAction { n_states: usize, n_actions: usize },
}

impl RewardLayout {
    pub fn len(&self) -> usize {
        match *self {
            RewardLayout::StateOnly { n_states } => n_states,
            RewardLayout::StateAction {
                n_states,
                n_actions,
            } => n_states * n_actions,
            RewardLayout::StateJointAction {
                n_states,
                n_actions,
            } => n_states * n_actions * n_actions,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_states(&self) -> usize {
        match *self {
            RewardLayout::StateOnly { n_states }
            | RewardLayout::StateAction { n_states, .. }
            | RewardLayout::StateJointAction { n_states, .. } => n_states,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardLayout::StateOnly { .. } => "state",
            RewardLayout::StateAction { .. } => "state_action",
            RewardLayout::StateJointAction { .. } => "state_joint_action",
        }
    }

    /// Index of `(s, a1, a2)`; components the layout does not carry are ignored.
    #[inline]
    pub fn index(&self, s: usize, a1: usize, a2: usize) -> usize {
        match *self {
            RewardLayout::StateOnly { .. } => s,
            RewardLayout::StateAction { n_states, .. } => a1 * n_states + s,
            RewardLayout::StateJointAction {
                n_states,
                n_actions,
            } => (a1 * n_actions + a2) * n_states + s,
        }
    }

    /// Inverse of [`RewardLayout::index`] as `(s, a1, a2)`; absent components are `None`.
    pub fn decode(&self, idx: usize) -> (usize, Option<usize>, Option<usize>) {
        match *self {
            RewardLayout::StateOnly { .. } => (idx, None, None),
            RewardLayout::StateAction { n_states, .. } => {
                (idx % n_states, Some(idx / n_states), None)
            }
            RewardLayout::StateJointAction {
                n_states,
                n_actions,
            } => {
                let block = idx / n_states;
                (idx % n_states, Some(block / n_actions), Some(block % n_actions))
            }
        }
    }

    /// Checks that this layout can be used with a game of the given shape.
    pub fn check_game(&self, n_states: usize, n_actions: usize) -> Result<()> {
        let ok = match *self {
            RewardLayout::StateOnly { n_states: n } => n == n_states,
            RewardLayout::StateAction {
                n_states: n,
                n_actions: m,
            }
            | RewardLayout::StateJointAction {
                n_states: n,
                n_actions: m,
            } => n == n_states && m == n_actions,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{self:?} incompatible with a game of {n_states} states and {n_actions} actions"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    layout: RewardLayout,
    values: Vec<f64>,
}

impl RewardVector {
    pub fn new(layout: RewardLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::dim(format!(
                "{} reward vector needs {} entries, got {}",
                layout.name(),
                layout.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("rewards", format!("entry {i} is not finite")));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: RewardLayout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn layout(&self) -> RewardLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Player 1's reward for joint action `(a1, a2)` in `s`.
    ///
    /// State-only rewards are broadcast over joint actions and state-action
    /// rewards are treated as independent of player 2's action.
    #[inline]
    pub fn joint(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.values[self.layout.index(s, a1, a2)]
    }

    /// Expands to the state-joint-action layout for a game with `n_actions` actions per player.
    pub fn to_joint(&self, n_actions: usize) -> Result<RewardVector> {
        let n = self.layout.n_states();
        let target = RewardLayout::StateJointAction {
            n_states: n,
            n_actions,
        };
        if let RewardLayout::StateAction { n_actions: m, .. }
        | RewardLayout::StateJointAction { n_actions: m, .. } = self.layout
        {
            if m != n_actions {
                return Err(Error::dim(format!(
                    "reward layout has {m} actions, game has {n_actions}"
                )));
            }
        }
        let mut values = vec![0.0; target.len()];
        for a1 in 0..n_actions {
            for a2 in 0..n_actions {
                for s in 0..n {
                    values[target.index(s, a1, a2)] = self.joint(s, a1, a2);
                }
            }
        }
        Ok(RewardVector {
            layout: target,
            values,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_distance(&self, other: &RewardVector) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::dim("reward layouts differ"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_layout_is_action_major() {
        let l = RewardLayout::StateJointAction {
            n_states: 3,
            n_actions: 2,
        };
        assert_eq!(l.len(), 12);
        assert_eq!(l.index(0, 0, 0), 0);
        assert_eq!(l.index(2, 0, 0), 2);
        assert_eq!(l.index(0, 0, 1), 3);
        assert_eq!(l.index(1, 1, 0), 7);
        for i in 0..l.len() {
            let (s, a1, a2) = l.decode(i);
            assert_eq!(l.index(s, a1.unwrap(), a2.unwrap()), i);
        }
    }

    #[test]
    fn state_action_layout_blocks_by_action() {
        let l = RewardLayout::StateAction {
            n_states: 4,
            n_actions: 3,
        };
        assert_eq!(l.index(3, 0, 9), 3);
        assert_eq!(l.index(0, 2, 0), 8);
        assert_eq!(l.decode(9), (1, Some(2), None));
    }

    #[test]
    fn broadcast_to_joint() {
        let r = RewardVector::new(RewardLayout::StateOnly { n_states: 2 }, vec![1.0, -2.0]).unwrap();
        let j = r.to_joint(3).unwrap();
        assert_eq!(j.len(), 18);
        assert_eq!(j.joint(1, 2, 1), -2.0);
        let sa = RewardVector::new(
            RewardLayout::StateAction {
                n_states: 2,
                n_actions: 2,
            },
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let j = sa.to_joint(2).unwrap();
        assert_eq!(j.joint(1, 1, 0), 4.0);
        assert_eq!(j.joint(1, 1, 1), 4.0);
        assert!(sa.to_joint(3).is_err());
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let l = RewardLayout::StateOnly { n_states: 2 };
        assert!(RewardVector::new(l, vec![0.0]).is_err());
        assert!(RewardVector::new(l, vec![0.0, f64::NAN]).is_err());
    }
}
