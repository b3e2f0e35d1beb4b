//! Simulation: soccer episodes between two independently derived policies,
//! tournaments over several exchange probabilities, and rollout estimates of
//! discounted returns.
//!
//! Every episode draws from its own ChaCha stream selected by
//! `(master seed, episode index)`, so results do not depend on scheduling.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{minimax_bipolicy, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::layout::RewardVector;
use crate::policy::{check_stochastic, Bipolicy};
use crate::soccer::{Action, Possession, SoccerGame};

pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
    Draw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub winner: Winner,
    pub steps: usize,
    /// Square the winner scored from (a goal square, or the square of a successful shot).
    pub score_square: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TournamentStats {
    pub beta: f64,
    pub episodes: usize,
    pub a_wins: usize,
    pub b_wins: usize,
    pub draws: usize,
}

impl TournamentStats {
    pub fn decisive(&self) -> usize {
        self.a_wins + self.b_wins
    }

    /// B's share of the decisive episodes, in percent.
    pub fn b_win_pct_of_decisive(&self) -> Option<f64> {
        let d = self.decisive();
        (d > 0).then(|| 100.0 * self.b_wins as f64 / d as f64)
    }
}

/// Random stream of one episode.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Minimax bipolicy of `game` when player 1's rewards are `rewards`.
pub fn policy_from_rewards(game: &MarkovGame, rewards: &RewardVector, gamma: f64) -> Result<Bipolicy> {
    Ok(minimax_bipolicy(game, rewards, gamma, DEFAULT_TOL, DEFAULT_MAX_ITERS)?.0)
}

fn sampler(policy: &DMatrix<f64>) -> Vec<WeightedIndex<f64>> {
    policy
        .row_iter()
        .map(|row| WeightedIndex::new(row.iter().copied()).expect("policy rows are distributions"))
        .collect()
}

fn sample_pair<R: Rng>(pairs: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(s, p) in pairs {
        acc += p;
        if u < acc {
            return s;
        }
    }
    pairs[pairs.len() - 1].0
}

/// Plays one episode with a caller-supplied random stream.
pub fn play_episode<R: Rng>(
    soccer: &SoccerGame,
    policy_a: &DMatrix<f64>,
    policy_b: &DMatrix<f64>,
    max_steps: usize,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    let sa = sampler(policy_a);
    let sb = sampler(policy_b);
    Ok(run(soccer, &sa, &sb, max_steps, rng))
}

fn run<R: Rng>(
    soccer: &SoccerGame,
    sa: &[WeightedIndex<f64>],
    sb: &[WeightedIndex<f64>],
    max_steps: usize,
    rng: &mut R,
) -> EpisodeOutcome {
    let reset = soccer.reset_distribution();
    let actions = soccer.actions();
    let kernel = soccer.game().kernel();
    let (pss_a, pss_b) = match soccer.pss() {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let mut s = sample_pair(&reset, rng);
    for step in 0..max_steps {
        let a1 = sa[s].sample(rng);
        let a2 = sb[s].sample(rng);
        let st = soccer.decode(s).expect("state in range");
        let (holder_action, pss) = match st.possession {
            Possession::A => (actions[a1], pss_a),
            Possession::B => (actions[a2], pss_b),
        };
        if holder_action == Action::Shoot {
            let p = pss.expect("shoot exists only with PSS tables").get(st.holder_pos());
            if rng.gen::<f64>() < p {
                return EpisodeOutcome {
                    winner: winner_of(st.possession),
                    steps: step + 1,
                    score_square: Some(st.holder_pos()),
                };
            }
            s = sample_pair(&reset, rng);
            continue;
        }
        let (targets, probs) = kernel.row(s, a1, a2);
        let pairs: Vec<(usize, f64)> = targets.iter().copied().zip(probs.iter().copied()).collect();
        s = sample_pair(&pairs, rng);
        if soccer.is_scoring(s) {
            let st = soccer.decode(s).expect("state in range");
            return EpisodeOutcome {
                winner: winner_of(st.possession),
                steps: step + 1,
                score_square: Some(st.holder_pos()),
            };
        }
    }
    EpisodeOutcome {
        winner: Winner::Draw,
        steps: max_steps,
        score_square: None,
    }
}

fn winner_of(p: Possession) -> Winner {
    match p {
        Possession::A => Winner::A,
        Possession::B => Winner::B,
    }
}

fn check_policy(soccer: &SoccerGame, policy: &DMatrix<f64>, name: &str) -> Result<()> {
    if policy.shape() != (soccer.n_states(), soccer.n_actions()) {
        return Err(Error::dim(format!(
            "{name} is {:?}, game has {} states and {} actions",
            policy.shape(),
            soccer.n_states(),
            soccer.n_actions()
        )));
    }
    check_stochastic(policy, name)
}

/// Plays one episode from kick-off: A follows `policy_a`, B follows `policy_b`.
pub fn simulate_episode(
    soccer: &SoccerGame,
    policy_a: &DMatrix<f64>,
    policy_b: &DMatrix<f64>,
    seed: u64,
    max_steps: usize,
) -> Result<EpisodeOutcome> {
    check_policy(soccer, policy_a, "policy_a")?;
    check_policy(soccer, policy_b, "policy_b")?;
    play_episode(soccer, policy_a, policy_b, max_steps, &mut episode_rng(seed, 0))
}

/// Plays `episodes` episodes between fixed policies.
pub fn play_matches(
    soccer: &SoccerGame,
    policy_a: &DMatrix<f64>,
    policy_b: &DMatrix<f64>,
    episodes: usize,
    seed: u64,
    max_steps: usize,
) -> Result<TournamentStats> {
    check_policy(soccer, policy_a, "policy_a")?;
    check_policy(soccer, policy_b, "policy_b")?;
    if episodes == 0 {
        return Err(Error::param("episodes", "must be at least 1"));
    }
    let sa = sampler(policy_a);
    let sb = sampler(policy_b);
    let (a_wins, b_wins, draws) = (0..episodes as u64)
        .into_par_iter()
        .map(|e| match run(soccer, &sa, &sb, max_steps, &mut episode_rng(seed, e)).winner {
            Winner::A => (1, 0, 0),
            Winner::B => (0, 1, 0),
            Winner::Draw => (0, 0, 1),
        })
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    Ok(TournamentStats {
        beta: soccer.beta(),
        episodes,
        a_wins,
        b_wins,
        draws,
    })
}

/// For each exchange probability: rebuilds the game, derives A's policy from
/// `rewards_a` and B's from `rewards_b` (both in player 1's terms, each player
/// solving the game it believes in), and plays `episodes` episodes.
#[allow(clippy::too_many_arguments)]
pub fn run_tournament(
    soccer: &SoccerGame,
    rewards_a: &RewardVector,
    rewards_b: &RewardVector,
    episodes: usize,
    betas: &[f64],
    gamma: f64,
    seed: u64,
    max_steps: usize,
) -> Result<Vec<TournamentStats>> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be at least 1"));
    }
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        let game = soccer.with_beta(beta)?;
        let pol_a = policy_from_rewards(game.game(), rewards_a, gamma)?;
        let pol_b = policy_from_rewards(game.game(), rewards_b, gamma)?;
        out.push(play_matches(&game, pol_a.pi1(), pol_b.pi2(), episodes, seed, max_steps)?);
    }
    Ok(out)
}

/// Discounted return of one rollout of `horizon` steps from `start`.
pub fn rollout_return<R: Rng>(
    game: &MarkovGame,
    rewards: &RewardVector,
    bipolicy: &Bipolicy,
    gamma: f64,
    start: usize,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let s1 = sampler(bipolicy.pi1());
    let s2 = sampler(bipolicy.pi2());
    rollout(game, rewards, &s1, &s2, gamma, start, horizon, rng)
}

#[allow(clippy::too_many_arguments)]
fn rollout<R: Rng>(
    game: &MarkovGame,
    rewards: &RewardVector,
    s1: &[WeightedIndex<f64>],
    s2: &[WeightedIndex<f64>],
    gamma: f64,
    start: usize,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let mut s = start;
    let mut total = 0.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        let a1 = s1[s].sample(rng);
        let a2 = s2[s].sample(rng);
        total += disc * rewards.joint(s, a1, a2);
        disc *= gamma;
        let (t, p) = game.kernel().row(s, a1, a2);
        let pairs: Vec<(usize, f64)> = t.iter().copied().zip(p.iter().copied()).collect();
        s = sample_pair(&pairs, rng);
    }
    total
}

/// Mean discounted return from `start` and its standard error.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value(
    game: &MarkovGame,
    rewards: &RewardVector,
    bipolicy: &Bipolicy,
    gamma: f64,
    start: usize,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    bipolicy.check_game(game)?;
    rewards.layout().check_game(game.n_states(), game.n_actions())?;
    game.check_state(start)?;
    if episodes < 2 {
        return Err(Error::param("episodes", "need at least 2 rollouts"));
    }
    let s1 = sampler(bipolicy.pi1());
    let s2 = sampler(bipolicy.pi2());
    let returns: Vec<f64> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| rollout(game, rewards, &s1, &s2, gamma, start, horizon, &mut episode_rng(seed, e)))
        .collect();
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
