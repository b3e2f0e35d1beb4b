//! Experiment driver: builds soccer games, solves for equilibria, recovers
//! rewards with the multi-agent and single-agent programs and plays the
//! recovered players against each other.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MIRL_OUT_DIR";
