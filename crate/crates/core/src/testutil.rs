//! Random instance generators shared by the unit and integration tests.

use nalgebra::DMatrix;
use rand::Rng;

use crate::game::{MarkovGame, TransitionKernel};
use crate::layout::{RewardLayout, RewardVector};
use crate::policy::Bipolicy;

/// Random game with up to three successors per joint action and joint rewards in [-1, 1].
pub fn random_game<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64) -> MarkovGame {
    let kernel = TransitionKernel::from_fn(n_states, n_actions, |_, _, _| {
        let k = rng.gen_range(1..=3.min(n_states));
        let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let mut row: Vec<(usize, f64)> = w
            .into_iter()
            .map(|p| (rng.gen_range(0..n_states), p))
            .collect();
        // exact unit sum after merging
        let head: f64 = row[1..].iter().map(|e| e.1).sum();
        row[0].1 = 1.0 - head;
        row
    })
    .expect("valid random kernel");
    let layout = RewardLayout::StateJointAction {
        n_states,
        n_actions,
    };
    let rewards = RewardVector::new(layout, (0..layout.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("valid rewards");
    MarkovGame::new(kernel, rewards, gamma).expect("valid game")
}

/// Random row-stochastic matrix; roughly a fifth of the entries are zero.
pub fn random_policy<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n_states, n_actions);
    for s in 0..n_states {
        let keep = rng.gen_range(0..n_actions);
        for a in 0..n_actions {
            if a == keep || rng.gen_bool(0.8) {
                p[(s, a)] = rng.gen_range(0.01..1.0);
            }
        }
        let total: f64 = p.row(s).sum();
        for a in 0..n_actions {
            p[(s, a)] /= total;
        }
    }
    p
}

pub fn random_bipolicy<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize) -> Bipolicy {
    let pi1 = random_policy(rng, n_states, n_actions);
    let pi2 = random_policy(rng, n_states, n_actions);
    Bipolicy::new(pi1, pi2).expect("valid random bipolicy")
}
