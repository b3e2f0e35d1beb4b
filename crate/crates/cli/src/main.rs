use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use mirl_cli::commands::{
    cmd_build_game, cmd_recover, cmd_solve_eq, cmd_tournament, GameSpec, LayoutArg, RecoverArgs, TournamentArgs,
    VariantArg,
};
use mirl_cli::config::{ExperimentConfig, Scale};
use mirl_cli::pipeline::{plan, reproduce_all};
use mirl_cli::report::Method;
use mirl_cli::OUT_DIR_ENV;
use mirl_core::prior::{CovKind, MeanKind, PriorSpec};

#[derive(Parser)]
#[command(name = "mirl", version, about = "Inverse learning of rewards in two-player soccer games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a soccer game as JSON.
    BuildGame {
        #[arg(long, value_enum, default_value = "simple")]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "standard")]
        scale: Scale,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Comma-separated goal squares of A.
        #[arg(long, value_delimiter = ',')]
        goals_a: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        goals_b: Option<Vec<usize>>,
        #[arg(long)]
        start_a: Option<usize>,
        #[arg(long)]
        start_b: Option<usize>,
        /// Embed the transition kernel, which is checked on load.
        #[arg(long)]
        with_kernel: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve for the minimax bipolicy and audit it.
    SolveEq {
        #[arg(long)]
        game: PathBuf,
        /// Player 1's rewards to use instead of the game's own.
        #[arg(long)]
        rewards: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: PathBuf,
    },
    /// Recover player 1's rewards from an observed bipolicy.
    Recover {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        bipolicy: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Defaults to state rewards for the simple game and joint rewards for
        /// the shoot game with mirl, and state-action rewards with irl.
        #[arg(long, value_enum)]
        layout: Option<LayoutArg>,
        #[arg(long, default_value = "weak")]
        mean: MeanKind,
        #[arg(long, default_value = "identity")]
        cov: CovKind,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Play A (first rewards) against B (second rewards).
    Tournament {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        rewards_a: PathBuf,
        #[arg(long)]
        rewards_b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.6,1")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 5000)]
        episodes: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Labels written in the first two columns.
        #[arg(long, default_value = "")]
        mean_label: String,
        #[arg(long, default_value = "")]
        cov_label: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the whole experiment and write every table.
    ReproduceAll {
        /// JSON configuration; fields left out take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        scale: Option<Scale>,
        /// Print the plan and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Mirl,
    Irl,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildGame {
            variant,
            scale,
            beta,
            gamma,
            goals_a,
            goals_b,
            start_a,
            start_b,
            with_kernel,
            out,
        } => {
            let spec = GameSpec {
                variant,
                scale,
                beta,
                gamma,
                goals_a,
                goals_b,
                start_a,
                start_b,
            };
            let g = cmd_build_game(&spec, with_kernel, &out)?;
            println!("{} states, {} actions -> {}", g.n_states(), g.n_actions(), out.display());
        }
        Command::SolveEq {
            game,
            rewards,
            tol,
            out_dir,
        } => {
            let audit = cmd_solve_eq(&game, rewards.as_deref(), &out_dir, tol)?;
            println!("max deviation gain {:.3e}", audit.max_gain);
        }
        Command::Recover {
            game,
            bipolicy,
            method,
            layout,
            mean,
            cov,
            tol,
            out,
            report,
        } => {
            let method = match method {
                MethodArg::Mirl => Method::Mirl,
                MethodArg::Irl => Method::Irl,
            };
            let r = cmd_recover(&RecoverArgs {
                game,
                bipolicy,
                method,
                layout,
                prior: PriorSpec::new(mean, cov),
                tol,
                out,
                report,
            })?;
            println!(
                "{}: {} rewards, status {}, kkt {:.3e}",
                r.method.name(),
                r.n_unknowns,
                r.status,
                r.kkt_residual.unwrap_or(f64::NAN)
            );
        }
        Command::Tournament {
            game,
            rewards_a,
            rewards_b,
            betas,
            episodes,
            seed,
            max_steps,
            mean_label,
            cov_label,
            out,
        } => {
            let rows = cmd_tournament(&TournamentArgs {
                game,
                rewards_a,
                rewards_b,
                betas,
                episodes,
                seed,
                max_steps,
                labels: (mean_label, cov_label),
                out,
            })?;
            for row in rows {
                let s = row.stats;
                println!("beta {}: A {} B {} draws {}", s.beta, s.a_wins, s.b_wins, s.draws);
            }
        }
        Command::ReproduceAll {
            config,
            scale,
            dry_run,
            out_dir,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(scale) = scale {
                cfg.scale = scale;
            }
            cfg.validate()?;
            if dry_run {
                for line in plan(&cfg) {
                    println!("{line}");
                }
                return Ok(());
            }
            let Some(out_dir) = out_dir else {
                bail!("no output directory: pass --out-dir or set {OUT_DIR_ENV}");
            };
            let summary = reproduce_all(&cfg, &out_dir, &mut std::io::stderr())?;
            println!("{} files written to {}", summary.files.len(), out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
