//! Gaussian priors over player 1's rewards on the soccer games.
//!
//! Means encode increasingly specific guesses about where the goals are:
//!
//! * `Weak`: `+weak` in every entry of a state where A holds the ball, `-weak`
//!   where B holds it.
//! * `Median`: `+goal` when A holds the ball anywhere in the leftmost column,
//!   `-goal` when B holds it anywhere in the rightmost column, `+shoot` on
//!   every entry where A holds the ball and shoots, 0 elsewhere.
//! * `Strong`: as `Median`, with the goal areas narrowed to the actual goal squares.
//!
//! The structured covariance groups entries believed to be the same quantity
//! into classes and uses `Sigma = sum_c 1_c 1_c' + eps I`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::RewardLayout;
use crate::soccer::{Possession, SoccerGame};

/// Diagonal jitter of the structured covariance.
pub const STRONG_COV_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    Weak,
    Median,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Identity,
    Strong,
}

impl MeanKind {
    pub const ALL: [MeanKind; 3] = [MeanKind::Weak, MeanKind::Median, MeanKind::Strong];

    pub fn as_str(self) -> &'static str {
        match self {
            MeanKind::Weak => "weak",
            MeanKind::Median => "median",
            MeanKind::Strong => "strong",
        }
    }
}

impl CovKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CovKind::Identity => "identity",
            CovKind::Strong => "strong",
        }
    }
}

impl fmt::Display for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for CovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weak" => Ok(MeanKind::Weak),
            "median" => Ok(MeanKind::Median),
            "strong" => Ok(MeanKind::Strong),
            _ => Err(Error::Parse(format!("unknown mean kind '{s}'"))),
        }
    }
}

impl FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(CovKind::Identity),
            "strong" => Ok(CovKind::Strong),
            _ => Err(Error::Parse(format!("unknown covariance kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mean_kind: MeanKind,
    pub cov_kind: CovKind,
    /// Magnitude of the weak mean.
    pub weak: f64,
    /// Magnitude of a hypothesized goal.
    pub goal: f64,
    /// Mean of A's shoot entries.
    pub shoot: f64,
}

impl PriorSpec {
    pub fn new(mean_kind: MeanKind, cov_kind: CovKind) -> Self {
        Self {
            mean_kind,
            cov_kind,
            weak: 0.8,
            goal: 1.0,
            shoot: 0.5,
        }
    }
}

/// Prior mean and covariance in `layout`, which must match the game's sizes.
pub fn build_prior(
    spec: &PriorSpec,
    soccer: &SoccerGame,
    layout: RewardLayout,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mu = prior_mean(spec, soccer, layout)?;
    let sigma = match spec.cov_kind {
        CovKind::Identity => DMatrix::identity(layout.len(), layout.len()),
        CovKind::Strong => strong_covariance(soccer, layout)?,
    };
    Ok((mu, sigma))
}

pub fn prior_mean(spec: &PriorSpec, soccer: &SoccerGame, layout: RewardLayout) -> Result<DVector<f64>> {
    layout.check_game(soccer.n_states(), soccer.n_actions())?;
    let grid = soccer.grid();
    let shoot = soccer.shoot_action();
    let (goal_a, goal_b) = match spec.mean_kind {
        MeanKind::Weak => (Vec::new(), Vec::new()),
        MeanKind::Median => (grid.left_column(), grid.right_column()),
        MeanKind::Strong => (grid.goal_squares_a.clone(), grid.goal_squares_b.clone()),
    };
    let mut mu = DVector::zeros(layout.len());
    for idx in 0..layout.len() {
        let (s, a1, _) = layout.decode(idx);
        let st = soccer.decode(s)?;
        mu[idx] = match (spec.mean_kind, st.possession) {
            (MeanKind::Weak, Possession::A) => spec.weak,
            (MeanKind::Weak, Possession::B) => -spec.weak,
            (_, Possession::A) if a1.is_some() && a1 == shoot => spec.shoot,
            (_, Possession::A) if goal_a.contains(&st.pos_a) => spec.goal,
            (_, Possession::B) if goal_b.contains(&st.pos_b) => -spec.goal,
            _ => 0.0,
        };
    }
    Ok(mu)
}

/// Equivalence classes of the structured covariance, as lists of layout indices.
///
/// With A holding the ball: A's shoot entries form one class per square of A
/// (the shot pays the same wherever B stands), and A's other entries form one
/// class per state. With B holding the ball the entries of each state form one
/// class, split by whether B shoots when the layout carries B's action.
pub fn strong_covariance_classes(soccer: &SoccerGame, layout: RewardLayout) -> Result<Vec<Vec<usize>>> {
    layout.check_game(soccer.n_states(), soccer.n_actions())?;
    let Some(shoot) = soccer.shoot_action() else {
        return Err(Error::Unsupported(
            "the structured covariance needs a shoot action".into(),
        ));
    };
    if matches!(layout, RewardLayout::StateOnly { .. }) {
        return Err(Error::Unsupported(
            "the structured covariance needs an action-dependent layout".into(),
        ));
    }
    let n = soccer.n_states();
    let n_sq = soccer.grid().n_squares();
    let mut shoot_by_square: Vec<Vec<usize>> = vec![Vec::new(); n_sq];
    // per state: [A holding non-shoot | B holding non-shoot, B holding shoot]
    let mut per_state: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; n];
    for idx in 0..layout.len() {
        let (s, a1, a2) = layout.decode(idx);
        let st = soccer.decode(s)?;
        match st.possession {
            Possession::A if a1 == Some(shoot) => shoot_by_square[st.pos_a - 1].push(idx),
            Possession::A => per_state[s][0].push(idx),
            Possession::B if a2 == Some(shoot) => per_state[s][1].push(idx),
            Possession::B => per_state[s][0].push(idx),
        }
    }
    let mut classes: Vec<Vec<usize>> = shoot_by_square.into_iter().filter(|c| !c.is_empty()).collect();
    for [a, b] in per_state {
        classes.extend([a, b].into_iter().filter(|c| !c.is_empty()));
    }
    Ok(classes)
}

pub fn strong_covariance(soccer: &SoccerGame, layout: RewardLayout) -> Result<DMatrix<f64>> {
    let classes = strong_covariance_classes(soccer, layout)?;
    let len = layout.len();
    let mut sigma = DMatrix::identity(len, len) * STRONG_COV_EPS;
    for class in &classes {
        for &i in class {
            for &j in class {
                sigma[(i, j)] += 1.0;
            }
        }
    }
    Ok(sigma)
}
