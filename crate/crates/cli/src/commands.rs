//! The single-step subcommands, as functions over file paths.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use mirl_core::equilibrium::{deviation_audit, minimax_bipolicy, DeviationAudit, DEFAULT_MAX_ITERS};
use mirl_core::io::{
    load_game, open_file, read_bipolicy_csv, read_rewards_csv, save_game, write_bipolicy_csv, write_file,
    write_rewards_csv, write_tournament_csv, write_values_csv, TournamentRow,
};
use mirl_core::irl::{irl_constraints, irl_state_constraints};
use mirl_core::mirl::{joint_constraints, solve_recovery, state_constraints, ConstraintSystem, Recovery};
use mirl_core::montecarlo::run_tournament;
use mirl_core::prior::{build_prior, PriorSpec};
use mirl_core::{Bipolicy, RewardLayout, RewardVector, SoccerConfig, SoccerGame, Variant};
use serde::{Deserialize, Serialize};

use crate::config::{hash_json, sha256_hex, Scale};
use crate::report::{Method, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Simple,
    Shoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LayoutArg {
    /// One reward per state.
    State,
    /// One reward per state and action of player 1.
    StateAction,
    /// One reward per state and joint action.
    Joint,
}

/// Game parameters with optional grid overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub variant: VariantArg,
    pub scale: Scale,
    pub beta: f64,
    pub gamma: f64,
    pub goals_a: Option<Vec<usize>>,
    pub goals_b: Option<Vec<usize>>,
    pub start_a: Option<usize>,
    pub start_b: Option<usize>,
}

impl GameSpec {
    pub fn new(variant: VariantArg, scale: Scale) -> Self {
        Self {
            variant,
            scale,
            beta: 0.6,
            gamma: 0.9,
            goals_a: None,
            goals_b: None,
            start_a: None,
            start_b: None,
        }
    }

    pub fn config(&self) -> SoccerConfig {
        let mut grid = self.scale.grid();
        if let Some(g) = &self.goals_a {
            grid.goal_squares_a = g.clone();
        }
        if let Some(g) = &self.goals_b {
            grid.goal_squares_b = g.clone();
        }
        if let Some(s) = self.start_a {
            grid.initial_pos_a = s;
        }
        if let Some(s) = self.start_b {
            grid.initial_pos_b = s;
        }
        match self.variant {
            VariantArg::Simple => SoccerConfig::simple(grid, self.beta, self.gamma),
            VariantArg::Shoot => SoccerConfig::shoot(grid, self.beta, self.gamma),
        }
    }
}

pub fn cmd_build_game(spec: &GameSpec, with_kernel: bool, out: &Path) -> Result<SoccerGame> {
    let soccer = spec.config().build().context("building the game")?;
    save_game(&soccer, with_kernel, out).with_context(|| format!("writing {}", out.display()))?;
    Ok(soccer)
}

fn load(path: &Path) -> Result<SoccerGame> {
    load_game(path).with_context(|| format!("loading game {}", path.display()))
}

fn load_rewards(path: &Path) -> Result<RewardVector> {
    read_rewards_csv(open_file(path)?).with_context(|| format!("reading rewards {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub iterations_tol: f64,
    pub pinned_gain1: f64,
    pub pinned_gain2: f64,
    pub one_step_gain1: f64,
    pub one_step_gain2: f64,
    pub max_gain: f64,
}

impl AuditReport {
    pub fn new(audit: &DeviationAudit, tol: f64) -> Self {
        Self {
            iterations_tol: tol,
            pinned_gain1: audit.pinned_gain1,
            pinned_gain2: audit.pinned_gain2,
            one_step_gain1: audit.one_step_gain1,
            one_step_gain2: audit.one_step_gain2,
            max_gain: audit.max_gain(),
        }
    }
}

/// Minimax bipolicy, values and deviation audit of a game under its own
/// rewards, or under `rewards` when given.
pub fn solve_equilibrium(soccer: &SoccerGame, rewards: Option<&RewardVector>, tol: f64) -> Result<EquilibriumOutput> {
    let r = rewards.unwrap_or(soccer.game().rewards());
    let gamma = soccer.config().gamma;
    let (bipolicy, values) = minimax_bipolicy(soccer.game(), r, gamma, tol, DEFAULT_MAX_ITERS)?;
    let audit = deviation_audit(soccer.game(), r, &bipolicy, gamma)?;
    Ok(EquilibriumOutput {
        bipolicy,
        values,
        audit: AuditReport::new(&audit, tol),
    })
}

pub struct EquilibriumOutput {
    pub bipolicy: Bipolicy,
    pub values: mirl_core::equilibrium::ValueFunction,
    pub audit: AuditReport,
}

impl EquilibriumOutput {
    /// Writes `bipolicy.csv`, `values.csv` and `audit.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_file(&dir.join("bipolicy.csv"), |w| write_bipolicy_csv(&self.bipolicy, w))?;
        write_file(&dir.join("values.csv"), |w| write_values_csv(&self.values, w))?;
        write_json(&dir.join("audit.json"), &self.audit)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_solve_eq(game: &Path, rewards: Option<&Path>, out_dir: &Path, tol: f64) -> Result<AuditReport> {
    let soccer = load(game)?;
    let rewards = rewards.map(load_rewards).transpose()?;
    let out = solve_equilibrium(&soccer, rewards.as_ref(), tol)?;
    out.write(out_dir)?;
    Ok(out.audit)
}

pub fn default_layout(method: Method, variant: Variant) -> LayoutArg {
    match (method, variant) {
        (Method::Mirl, Variant::Simple) => LayoutArg::State,
        (Method::Mirl, Variant::Shoot) => LayoutArg::Joint,
        (Method::Irl, _) => LayoutArg::StateAction,
    }
}

pub fn reward_layout(soccer: &SoccerGame, layout: LayoutArg) -> RewardLayout {
    let (n_states, n_actions) = (soccer.n_states(), soccer.n_actions());
    match layout {
        LayoutArg::State => RewardLayout::StateOnly { n_states },
        LayoutArg::StateAction => RewardLayout::StateAction { n_states, n_actions },
        LayoutArg::Joint => RewardLayout::StateJointAction { n_states, n_actions },
    }
}

pub fn constraints(
    soccer: &SoccerGame,
    observed: &Bipolicy,
    method: Method,
    layout: LayoutArg,
) -> mirl_core::Result<ConstraintSystem> {
    let (game, gamma) = (soccer.game(), soccer.config().gamma);
    match (method, layout) {
        (Method::Mirl, LayoutArg::State) => state_constraints(game, observed, gamma),
        (Method::Mirl, LayoutArg::Joint) => joint_constraints(game, observed, gamma),
        (Method::Irl, LayoutArg::StateAction) => irl_constraints(game, observed, gamma),
        (Method::Irl, LayoutArg::State) => irl_state_constraints(game, observed, gamma),
        (m, l) => Err(mirl_core::Error::Unsupported(format!(
            "{} recovery has no {:?} layout",
            m.name(),
            l
        ))),
    }
}

/// Builds the prior and constraints and solves one recovery program.
pub fn recover(
    soccer: &SoccerGame,
    observed: &Bipolicy,
    method: Method,
    layout: LayoutArg,
    prior: &PriorSpec,
    tol: f64,
) -> mirl_core::Result<(Recovery, usize)> {
    let (mu, sigma) = build_prior(prior, soccer, reward_layout(soccer, layout))?;
    let system = constraints(soccer, observed, method, layout)?;
    let rec = solve_recovery(&system, &mu, &sigma, tol)?;
    Ok((rec, system.n_rows()))
}

pub struct RecoverArgs {
    pub game: PathBuf,
    pub bipolicy: PathBuf,
    pub method: Method,
    pub layout: Option<LayoutArg>,
    pub prior: PriorSpec,
    pub tol: f64,
    pub out: PathBuf,
    pub report: PathBuf,
}

#[derive(Serialize)]
struct RecoverFingerprint<'a> {
    game: &'a SoccerConfig,
    bipolicy_sha256: String,
    method: Method,
    layout: LayoutArg,
    prior: &'a PriorSpec,
    tol: f64,
}

/// Runs a recovery and writes the rewards and a run report. A failed program
/// still leaves its report behind before the error is returned.
pub fn cmd_recover(args: &RecoverArgs) -> Result<RunReport> {
    let soccer = load(&args.game)?;
    let bytes = std::fs::read(&args.bipolicy).with_context(|| format!("reading {}", args.bipolicy.display()))?;
    let layout = args
        .layout
        .unwrap_or_else(|| default_layout(args.method, soccer.config().variant));
    let hash = hash_json(&RecoverFingerprint {
        game: soccer.config(),
        bipolicy_sha256: sha256_hex(&bytes),
        method: args.method,
        layout,
        prior: &args.prior,
        tol: args.tol,
    });
    let target = reward_layout(&soccer, layout);
    let start = Instant::now();
    let result = read_bipolicy_csv(bytes.as_slice())
        .and_then(|bp| recover(&soccer, &bp, args.method, layout, &args.prior, args.tol));
    let elapsed = Some(start.elapsed().as_secs_f64());
    let report = match &result {
        Ok((rec, rows)) => RunReport::from_recovery(args.method, rec, *rows, hash, elapsed),
        Err(e) => RunReport::from_error(args.method, target.name(), target.len(), e, hash, elapsed),
    };
    std::fs::write(&args.report, report.to_json())
        .with_context(|| format!("writing {}", args.report.display()))?;
    match result {
        Ok((rec, _)) => {
            write_file(&args.out, |w| write_rewards_csv(&rec.rewards, w))?;
            Ok(report)
        }
        Err(e) => bail!("recovery {}: {e}", report.status),
    }
}

pub struct TournamentArgs {
    pub game: PathBuf,
    pub rewards_a: PathBuf,
    pub rewards_b: PathBuf,
    pub betas: Vec<f64>,
    pub episodes: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub labels: (String, String),
    pub out: PathBuf,
}

pub fn cmd_tournament(args: &TournamentArgs) -> Result<Vec<TournamentRow>> {
    let soccer = load(&args.game)?;
    let ra = load_rewards(&args.rewards_a)?;
    let rb = load_rewards(&args.rewards_b)?;
    let stats = run_tournament(
        &soccer,
        &ra,
        &rb,
        args.episodes,
        &args.betas,
        soccer.config().gamma,
        args.seed,
        args.max_steps,
    )?;
    let rows: Vec<TournamentRow> = stats
        .into_iter()
        .map(|stats| TournamentRow {
            mean_kind: args.labels.0.clone(),
            cov_kind: args.labels.1.clone(),
            stats,
        })
        .collect();
    write_file(&args.out, |w| write_tournament_csv(&rows, w))?;
    Ok(rows)
}
