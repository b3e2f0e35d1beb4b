//! Experiment configuration, read from JSON with defaults for every field.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use mirl_core::prior::{CovKind, MeanKind};
use mirl_core::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// The 4x5 field.
    Standard,
    /// The 2x2 field, for quick runs.
    Small,
}

impl Scale {
    pub fn grid(self) -> GridSpec {
        match self {
            Scale::Standard => GridSpec::standard(),
            Scale::Small => GridSpec::small(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Simple game: equilibrium and state-reward recoveries.
    Simple,
    /// Shoot game: joint and single-agent recoveries, PSS tables.
    Shoot,
    /// Matches between the players built from the shoot-game recoveries.
    Tournament,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simple => "simple",
            Stage::Shoot => "shoot",
            Stage::Tournament => "tournament",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: Scale,
    /// Replaces the grid implied by `scale`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Exchange probability of the games the rewards are recovered on.
    pub beta: f64,
    pub gamma: f64,
    pub tol: f64,
    pub means: Vec<MeanKind>,
    pub covs: Vec<CovKind>,
    pub betas: Vec<f64>,
    pub episodes: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub stages: Vec<Stage>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scale: Scale::Standard,
            grid: None,
            beta: 0.6,
            gamma: 0.9,
            tol: 1e-8,
            means: MeanKind::ALL.to_vec(),
            covs: vec![CovKind::Identity, CovKind::Strong],
            betas: vec![0.0, 0.6, 1.0],
            episodes: 5000,
            seed: 2024,
            max_steps: 1000,
            stages: vec![Stage::Simple, Stage::Shoot, Stage::Tournament],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.clone().unwrap_or_else(|| self.scale.grid())
    }

    pub fn has_stage(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn validate(&self) -> Result<()> {
        let probability = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                bail!("config field `{name}` must lie in [0, 1], got {x}")
            }
        };
        probability("beta", self.beta)?;
        for &b in &self.betas {
            probability("betas", b)?;
        }
        if !(0.0..1.0).contains(&self.gamma) {
            bail!("config field `gamma` must lie in [0, 1), got {}", self.gamma);
        }
        if !(self.tol > 0.0) {
            bail!("config field `tol` must be positive");
        }
        if self.means.is_empty() || self.covs.is_empty() {
            bail!("config fields `means` and `covs` must name at least one kind");
        }
        if self.episodes == 0 {
            bail!("config field `episodes` must be at least 1");
        }
        if self.betas.is_empty() && self.has_stage(Stage::Tournament) {
            bail!("config field `betas` is empty but the tournament stage is enabled");
        }
        if self.has_stage(Stage::Tournament) && !self.has_stage(Stage::Shoot) {
            bail!("the tournament stage needs the shoot stage");
        }
        self.grid().validate().context("config field `grid`")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("configuration serializes"))
}
