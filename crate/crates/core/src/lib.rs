//! Two-player zero-sum stochastic games and Bayesian inverse learning of their rewards.
//!
//! The crate covers the forward problem (minimax bipolicies by Shapley value
//! iteration over per-state matrix games) and two inverse problems that recover
//! player 1's rewards from an observed bipolicy:
//!
//! * [`mirl`]: the multi-agent programs, which use both players' minimax
//!   conditions, over state-only or state-joint-action rewards.
//! * [`irl`]: single-agent inverse learning on the MDP induced by holding
//!   player 2's policy fixed, over state-action rewards.
//!
//! Both are posed as convex quadratic programs with a Gaussian prior
//! objective and solved by [`solvers::qp`]. The [`soccer`] module builds the
//! grid-soccer games used for evaluation and [`montecarlo`] plays recovered
//! policies against each other.

pub mod equilibrium;
pub mod error;
pub mod game;
pub mod io;
pub mod irl;
pub mod layout;
pub mod mirl;
pub mod montecarlo;
pub mod operators;
pub mod policy;
pub mod prior;
pub mod soccer;
pub mod solvers;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
pub use game::{MarkovGame, Player, TransitionKernel};
pub use layout::{RewardLayout, RewardVector};
pub use policy::Bipolicy;
pub use soccer::{GridSpec, PssTable, SoccerConfig, SoccerGame, Variant};
