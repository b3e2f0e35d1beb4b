//! The full experiment: both game variants, every prior combination, PSS
//! tables and tournaments, written as a tree of CSV and JSON files.
//!
//! Nothing in the tree depends on timing or thread scheduling, so a rerun with
//! the same configuration reproduces it byte for byte. Wall times go to the log.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mirl_core::io::{write_rewards_csv, write_tournament_csv, TournamentRow};
use mirl_core::irl::extract_pss;
use mirl_core::mirl::{marginalize_rewards, MAX_DENSE_UNKNOWNS};
use mirl_core::montecarlo::run_tournament;
use mirl_core::prior::{CovKind, MeanKind, PriorSpec};
use mirl_core::{RewardVector, SoccerConfig, SoccerGame};
use serde::Serialize;

use crate::commands::{recover, solve_equilibrium, LayoutArg};
use crate::config::{sha256_hex, ExperimentConfig, Stage};
use crate::report::{Method, RunReport};

/// Files written so far, relative to the output root.
struct Tree {
    root: PathBuf,
    files: Vec<String>,
}

impl Tree {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.put(rel, text.as_bytes())
    }

    fn put_with<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> mirl_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.put(rel, &buf)
    }

    fn put_csv(&mut self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut text = header.join(",") + "\n";
        for row in rows {
            text += &row.join(",");
            text.push('\n');
        }
        self.put(rel, text.as_bytes())
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    files: Vec<ManifestEntry<'a>>,
}

/// What the run produced, for callers that check results directly.
#[derive(Debug, Default, Clone)]
pub struct Summary {
    pub files: Vec<String>,
    pub simple_audit_gain: Option<f64>,
    pub shoot_audit_gain: Option<f64>,
    pub pss: Vec<PssRow>,
    pub tournament: Vec<TournamentRow>,
    pub symmetry: Vec<TournamentRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PssRow {
    pub mean: MeanKind,
    pub cov: CovKind,
    pub mae_mirl: f64,
    pub mae_irl: f64,
}

/// Steps the run would take, one line each.
pub fn plan(config: &ExperimentConfig) -> Vec<String> {
    let grid = config.grid();
    let mut out = vec![format!(
        "grid {}x{}, beta {}, gamma {}, tol {:e}",
        grid.rows, grid.cols, config.beta, config.gamma, config.tol
    )];
    if config.has_stage(Stage::Simple) {
        out.push("simple: minimax bipolicy and deviation audit".into());
        for mean in &config.means {
            out.push(format!("simple: {mean} mean, identity covariance: mirl and irl state rewards, scatter table"));
        }
    }
    if config.has_stage(Stage::Shoot) {
        out.push("shoot: minimax bipolicy and deviation audit".into());
        for mean in &config.means {
            for cov in &config.covs {
                out.push(format!(
                    "shoot: {mean} mean, {cov} covariance: mirl joint and irl state-action rewards, PSS table"
                ));
            }
        }
    }
    if config.has_stage(Stage::Tournament) {
        let n = config.means.len() * config.covs.len() + 1;
        out.push(format!(
            "tournament: {n} pairings x {} betas x {} episodes, seed {}",
            config.betas.len(),
            config.episodes,
            config.seed
        ));
    }
    if config.has_stage(Stage::Shoot) {
        if let Err(e) = check_joint_size(config) {
            out.push(format!("warning: {e}"));
        }
    }
    out
}

fn stage_err(stage: Stage) -> String {
    format!("stage `{}` failed", stage.name())
}

/// Runs every configured stage and writes the results under `out`.
pub fn reproduce_all(config: &ExperimentConfig, out: &Path, log: &mut dyn Write) -> Result<Summary> {
    config.validate().context("invalid configuration")?;
    if config.has_stage(Stage::Shoot) {
        check_joint_size(config).context(stage_err(Stage::Shoot))?;
    }
    let hash = config.hash();
    let mut tree = Tree::new(out)?;
    let mut summary = Summary::default();
    #[derive(Serialize)]
    struct Stamped<'a> {
        config_hash: &'a str,
        config: &'a ExperimentConfig,
    }
    tree.put_json("config.json", &Stamped { config_hash: &hash, config })?;
    if config.has_stage(Stage::Simple) {
        simple_stage(config, &hash, &mut tree, &mut summary, log).context(stage_err(Stage::Simple))?;
    }
    let mut recovered = Vec::new();
    let shoot = if config.has_stage(Stage::Shoot) {
        let (game, rewards) =
            shoot_stage(config, &hash, &mut tree, &mut summary, log).context(stage_err(Stage::Shoot))?;
        recovered = rewards;
        Some(game)
    } else {
        None
    };
    if let (Some(game), true) = (&shoot, config.has_stage(Stage::Tournament)) {
        tournament_stage(config, game, &recovered, &mut tree, &mut summary, log)
            .context(stage_err(Stage::Tournament))?;
    }
    let entries = tree
        .files
        .iter()
        .map(|rel| {
            let bytes = std::fs::read(tree.root.join(rel))?;
            Ok(ManifestEntry {
                path: rel,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config_hash: hash.clone(),
        files: entries,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    tree.put("manifest.json", text.as_bytes())?;
    summary.files = tree.files.clone();
    Ok(summary)
}

/// Fails before any work is done when the joint program cannot be assembled.
fn check_joint_size(config: &ExperimentConfig) -> Result<()> {
    let n_states = config.grid().n_states();
    let unknowns = n_states * 6 * 6;
    if unknowns > MAX_DENSE_UNKNOWNS {
        bail!(
            "the joint program has {unknowns} unknowns, above the dense limit of {MAX_DENSE_UNKNOWNS}; \
             use `--scale small` or leave out the shoot and tournament stages"
        );
    }
    Ok(())
}

fn game_config(config: &ExperimentConfig, shoot: bool) -> SoccerConfig {
    let grid = config.grid();
    if shoot {
        SoccerConfig::shoot(grid, config.beta, config.gamma)
    } else {
        SoccerConfig::simple(grid, config.beta, config.gamma)
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

#[allow(clippy::too_many_arguments)]
fn run_recovery(
    soccer: &SoccerGame,
    observed: &mirl_core::Bipolicy,
    method: Method,
    layout: LayoutArg,
    prior: &PriorSpec,
    config: &ExperimentConfig,
    hash: &str,
    label: &str,
    tree: &mut Tree,
    log: &mut dyn Write,
) -> Result<RewardVector> {
    let start = Instant::now();
    let (rec, rows) = recover(soccer, observed, method, layout, prior, config.tol)
        .with_context(|| format!("{} recovery with {label}", method.name()))?;
    let report = RunReport::from_recovery(method, &rec, rows, hash.to_string(), None);
    writeln!(
        log,
        "  {} {label}: {} ({} iterations, kkt {:.2e}) in {:.2}s",
        method.name(),
        report.status,
        rec.solution.iterations,
        rec.solution.kkt_residual,
        start.elapsed().as_secs_f64()
    )?;
    tree.put_json(&format!("report_{label}_{}.json", method.name()), &report)?;
    tree.put_with(&format!("rewards_{label}_{}.csv", method.name()), |w| {
        write_rewards_csv(&rec.rewards, w)
    })?;
    Ok(rec.rewards)
}

/// Prefixes every file name the closure writes with `dir/`.
fn within<T>(tree: &mut Tree, dir: &str, f: impl FnOnce(&mut Tree) -> Result<T>) -> Result<T> {
    let mut sub = Tree {
        root: tree.root.join(dir),
        files: Vec::new(),
    };
    let out = f(&mut sub);
    tree.files.extend(sub.files.into_iter().map(|f| format!("{dir}/{f}")));
    out
}

fn simple_stage(
    config: &ExperimentConfig,
    hash: &str,
    tree: &mut Tree,
    summary: &mut Summary,
    log: &mut dyn Write,
) -> Result<()> {
    writeln!(log, "stage simple")?;
    let soccer = game_config(config, false).build()?;
    let eq = solve_equilibrium(&soccer, None, config.tol)?;
    summary.simple_audit_gain = Some(eq.audit.max_gain);
    writeln!(log, "  equilibrium audit: max gain {:.2e}", eq.audit.max_gain)?;
    within(tree, "simple", |t| {
        t.put_with("game.json", |w| mirl_core::io::write_game_json(&soccer, false, w))?;
        t.put_with("bipolicy.csv", |w| mirl_core::io::write_bipolicy_csv(&eq.bipolicy, w))?;
        t.put_with("values.csv", |w| mirl_core::io::write_values_csv(&eq.values, w))?;
        t.put_json("audit.json", &eq.audit)?;
        let truth = soccer.game().rewards();
        for &mean in &config.means {
            let prior = PriorSpec::new(mean, CovKind::Identity);
            let label = mean.as_str();
            let mirl = run_recovery(&soccer, &eq.bipolicy, Method::Mirl, LayoutArg::State, &prior, config, hash, label, t, log)?;
            let irl = run_recovery(&soccer, &eq.bipolicy, Method::Irl, LayoutArg::State, &prior, config, hash, label, t, log)?;
            let rows = (0..soccer.n_states()).map(|s| {
                vec![
                    s.to_string(),
                    fmt(truth.values()[s]),
                    fmt(mirl.values()[s]),
                    fmt(irl.values()[s]),
                ]
            });
            t.put_csv(&format!("scatter_{label}.csv"), &["state", "truth", "mirl", "irl"], rows)?;
        }
        Ok(())
    })
}

/// Recovered rewards of one prior combination: (mean, cov, irl, mirl).
type Recovered = (MeanKind, CovKind, RewardVector, RewardVector);

fn shoot_stage(
    config: &ExperimentConfig,
    hash: &str,
    tree: &mut Tree,
    summary: &mut Summary,
    log: &mut dyn Write,
) -> Result<(SoccerGame, Vec<Recovered>)> {
    writeln!(log, "stage shoot")?;
    let soccer = game_config(config, true).build()?;
    let eq = solve_equilibrium(&soccer, None, config.tol)?;
    summary.shoot_audit_gain = Some(eq.audit.max_gain);
    writeln!(log, "  equilibrium audit: max gain {:.2e}", eq.audit.max_gain)?;
    let pi2 = eq.bipolicy.pi2();
    let truth = soccer.game().rewards();
    let truth_marginal = marginalize_rewards(truth, pi2)?;
    let recovered = within(tree, "shoot", |t| {
        t.put_with("game.json", |w| mirl_core::io::write_game_json(&soccer, false, w))?;
        t.put_with("bipolicy.csv", |w| mirl_core::io::write_bipolicy_csv(&eq.bipolicy, w))?;
        t.put_with("values.csv", |w| mirl_core::io::write_values_csv(&eq.values, w))?;
        t.put_json("audit.json", &eq.audit)?;
        let mut recovered = Vec::new();
        for &mean in &config.means {
            for &cov in &config.covs {
                let prior = PriorSpec::new(mean, cov);
                let label = format!("{mean}_{cov}");
                let mirl = run_recovery(&soccer, &eq.bipolicy, Method::Mirl, LayoutArg::Joint, &prior, config, hash, &label, t, log)?;
                let irl = run_recovery(&soccer, &eq.bipolicy, Method::Irl, LayoutArg::StateAction, &prior, config, hash, &label, t, log)?;
                let mirl_marginal = marginalize_rewards(&mirl, pi2)?;
                let layout = truth_marginal.layout();
                let rows = (0..layout.len()).map(|i| {
                    let (s, a1, _) = layout.decode(i);
                    vec![
                        s.to_string(),
                        a1.unwrap_or(0).to_string(),
                        fmt(truth_marginal.values()[i]),
                        fmt(mirl_marginal.values()[i]),
                        fmt(irl.values()[i]),
                    ]
                });
                t.put_csv(&format!("scatter_{label}.csv"), &["state", "a1", "truth", "mirl", "irl"], rows)?;
                // both estimates of A's PSS come from player-1 rewards against pi2
                let pss_mirl = extract_pss(&mirl_marginal, &soccer)?;
                let pss_irl = extract_pss(&irl, &soccer)?;
                let pss_joint = extract_pss(&mirl, &soccer)?;
                let mirl_b = pss_joint.estimate_b.clone().unwrap_or_default();
                let rows = pss_mirl.squares.iter().enumerate().map(|(k, q)| {
                    vec![
                        q.to_string(),
                        fmt(pss_mirl.truth_a[k]),
                        fmt(pss_mirl.estimate_a[k]),
                        fmt(pss_irl.estimate_a[k]),
                        fmt(pss_mirl.truth_b[k]),
                        fmt(mirl_b[k]),
                    ]
                });
                t.put_csv(
                    &format!("pss_{label}.csv"),
                    &["square", "truth_a", "mirl_a", "irl_a", "truth_b", "mirl_b"],
                    rows,
                )?;
                summary.pss.push(PssRow {
                    mean,
                    cov,
                    mae_mirl: pss_mirl.mae_a(),
                    mae_irl: pss_irl.mae_a(),
                });
                recovered.push((mean, cov, irl, mirl));
            }
        }
        let rows = summary.pss.iter().map(|p| {
            vec![
                p.mean.to_string(),
                p.cov.to_string(),
                fmt(p.mae_mirl),
                fmt(p.mae_irl),
            ]
        });
        t.put_csv("pss_summary.csv", &["mean_kind", "cov_kind", "mae_mirl", "mae_irl"], rows)?;
        Ok(recovered)
    })?;
    Ok((soccer, recovered))
}

fn tournament_stage(
    config: &ExperimentConfig,
    soccer: &SoccerGame,
    recovered: &[Recovered],
    tree: &mut Tree,
    summary: &mut Summary,
    log: &mut dyn Write,
) -> Result<()> {
    writeln!(log, "stage tournament")?;
    let play = |a: &RewardVector, b: &RewardVector| {
        run_tournament(
            soccer,
            a,
            b,
            config.episodes,
            &config.betas,
            config.gamma,
            config.seed,
            config.max_steps,
        )
    };
    for (mean, cov, irl, mirl) in recovered {
        let start = Instant::now();
        for stats in play(irl, mirl).with_context(|| format!("{mean} mean, {cov} covariance"))? {
            writeln!(
                log,
                "  {mean}/{cov} beta {}: B wins {} of {} decisive in {:.2}s",
                stats.beta,
                stats.b_wins,
                stats.decisive(),
                start.elapsed().as_secs_f64()
            )?;
            summary.tournament.push(TournamentRow {
                mean_kind: mean.to_string(),
                cov_kind: cov.to_string(),
                stats,
            });
        }
    }
    let truth = soccer.game().rewards();
    for stats in play(truth, truth).context("identical rewards")? {
        summary.symmetry.push(TournamentRow {
            mean_kind: "truth".into(),
            cov_kind: "truth".into(),
            stats,
        });
    }
    within(tree, "tournament", |t| {
        t.put_with("results.csv", |w| write_tournament_csv(&summary.tournament, w))?;
        t.put_with("symmetry.csv", |w| write_tournament_csv(&summary.symmetry, w))
    })
}
