//! File formats: game documents (JSON) and reward, bipolicy, value and
//! tournament tables (CSV).
//!
//! Rewards are written as `state,a1,a2,reward`, leaving the action columns
//! empty where the layout has no such action. Floats use Rust's shortest
//! round-trip formatting, so write-read cycles are exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equilibrium::ValueFunction;
use crate::error::{Error, Result};
use crate::game::{KernelEntry, Player};
use crate::layout::{RewardLayout, RewardVector};
use crate::montecarlo::TournamentStats;
use crate::policy::Bipolicy;
use crate::soccer::{SoccerConfig, SoccerGame};

/// Serialized soccer game: the configuration plus, optionally, its kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDocument {
    pub config: SoccerConfig,
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<KernelEntry>>,
}

impl GameDocument {
    pub fn new(soccer: &SoccerGame, with_kernel: bool) -> Self {
        Self {
            config: soccer.config().clone(),
            n_states: soccer.n_states(),
            n_actions: soccer.n_actions(),
            kernel: with_kernel.then(|| soccer.game().kernel().entries()),
        }
    }

    /// Rebuilds the game and checks it against the stored sizes and kernel.
    pub fn build(&self) -> Result<SoccerGame> {
        let soccer = self.config.build()?;
        if soccer.n_states() != self.n_states || soccer.n_actions() != self.n_actions {
            return Err(Error::Parse(format!(
                "document declares {} states and {} actions, configuration builds {} and {}",
                self.n_states,
                self.n_actions,
                soccer.n_states(),
                soccer.n_actions()
            )));
        }
        if let Some(entries) = &self.kernel {
            let built = soccer.game().kernel().entries();
            let same = entries.len() == built.len()
                && entries.iter().zip(&built).all(|(a, b)| {
                    (a.0, a.1, a.2, a.3) == (b.0, b.1, b.2, b.3) && (a.4 - b.4).abs() <= 1e-12
                });
            if !same {
                return Err(Error::Parse(
                    "stored kernel does not match the configuration".into(),
                ));
            }
        }
        Ok(soccer)
    }
}

pub fn write_game_json<W: Write>(soccer: &SoccerGame, with_kernel: bool, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, &GameDocument::new(soccer, with_kernel))?;
    Ok(())
}

pub fn read_game_json<R: Read>(r: R) -> Result<SoccerGame> {
    let doc: GameDocument = serde_json::from_reader(r)?;
    doc.build()
}

pub fn save_game(soccer: &SoccerGame, with_kernel: bool, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_game_json(soccer, with_kernel, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn load_game(path: &Path) -> Result<SoccerGame> {
    read_game_json(BufReader::new(File::open(path)?))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rewards_csv<W: Write>(rewards: &RewardVector, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "a1", "a2", "reward"]).map_err(csv_err)?;
    let layout = rewards.layout();
    // state-major order reads naturally; the layout index fixes the value
    let n = layout.n_states();
    let (m1, m2) = match layout {
        RewardLayout::StateOnly { .. } => (1, 1),
        RewardLayout::StateAction { n_actions, .. } => (n_actions, 1),
        RewardLayout::StateJointAction { n_actions, .. } => (n_actions, n_actions),
    };
    for s in 0..n {
        for a1 in 0..m1 {
            for a2 in 0..m2 {
                let idx = layout.index(s, a1, a2);
                let (_, d1, d2) = layout.decode(idx);
                out.write_record([
                    s.to_string(),
                    opt(d1),
                    opt(d2),
                    rewards.values()[idx].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RewardRow {
    state: usize,
    a1: Option<usize>,
    a2: Option<usize>,
    reward: f64,
}

/// Reads a reward table; the layout follows from which action columns are filled.
pub fn read_rewards_csv<R: Read>(r: R) -> Result<RewardVector> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows: Vec<RewardRow> = rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    let Some(first) = rows.first() else {
        return Err(Error::Parse("reward table is empty".into()));
    };
    let kind = (first.a1.is_some(), first.a2.is_some());
    let n_states = rows.iter().map(|x| x.state).max().unwrap_or(0) + 1;
    let n_actions = rows
        .iter()
        .flat_map(|x| x.a1.into_iter().chain(x.a2))
        .max()
        .map_or(1, |a| a + 1);
    let layout = match kind {
        (false, false) => RewardLayout::StateOnly { n_states },
        (true, false) => RewardLayout::StateAction {
            n_states,
            n_actions,
        },
        (true, true) => RewardLayout::StateJointAction {
            n_states,
            n_actions,
        },
        (false, true) => return Err(Error::Parse("a2 given without a1".into())),
    };
    if rows.len() != layout.len() {
        return Err(Error::Parse(format!(
            "{} rows for a {} table that needs {}",
            rows.len(),
            layout.name(),
            layout.len()
        )));
    }
    let mut values = vec![f64::NAN; layout.len()];
    for (line, row) in rows.iter().enumerate() {
        if (row.a1.is_some(), row.a2.is_some()) != kind {
            return Err(Error::Parse(format!("row {} mixes layouts", line + 1)));
        }
        let idx = layout.index(row.state, row.a1.unwrap_or(0), row.a2.unwrap_or(0));
        if !values[idx].is_nan() {
            return Err(Error::Parse(format!("row {} repeats an entry", line + 1)));
        }
        values[idx] = row.reward;
    }
    RewardVector::new(layout, values)
}

pub fn write_bipolicy_csv<W: Write>(bipolicy: &Bipolicy, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "player", "action", "probability"]).map_err(csv_err)?;
    for s in 0..bipolicy.n_states() {
        for (tag, player) in [("1", Player::One), ("2", Player::Two)] {
            for a in 0..bipolicy.n_actions() {
                let p = bipolicy.policy(player)[(s, a)];
                out.write_record([s.to_string(), tag.to_string(), a.to_string(), p.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PolicyRow {
    state: usize,
    player: u8,
    action: usize,
    probability: f64,
}

pub fn read_bipolicy_csv<R: Read>(r: R) -> Result<Bipolicy> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows: Vec<PolicyRow> = rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    if rows.is_empty() {
        return Err(Error::Parse("bipolicy table is empty".into()));
    }
    let n = rows.iter().map(|x| x.state).max().unwrap_or(0) + 1;
    let m = rows.iter().map(|x| x.action).max().unwrap_or(0) + 1;
    if rows.len() != 2 * n * m {
        return Err(Error::Parse(format!(
            "{} rows, expected {} for {n} states and {m} actions",
            rows.len(),
            2 * n * m
        )));
    }
    let mut pi = [DMatrix::from_element(n, m, f64::NAN), DMatrix::from_element(n, m, f64::NAN)];
    for (line, row) in rows.iter().enumerate() {
        let k = match row.player {
            1 => 0,
            2 => 1,
            p => return Err(Error::Parse(format!("row {}: player {p} is not 1 or 2", line + 1))),
        };
        if !pi[k][(row.state, row.action)].is_nan() {
            return Err(Error::Parse(format!("row {} repeats an entry", line + 1)));
        }
        pi[k][(row.state, row.action)] = row.probability;
    }
    let [pi1, pi2] = pi;
    Bipolicy::new(pi1, pi2)
}

pub fn write_values_csv<W: Write>(values: &ValueFunction, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "value"]).map_err(csv_err)?;
    for (s, v) in values.values.iter().enumerate() {
        out.write_record([s.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One tournament result labelled with the prior that produced both reward sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TournamentRow {
    pub mean_kind: String,
    pub cov_kind: String,
    pub stats: TournamentStats,
}

pub fn write_tournament_csv<W: Write>(rows: &[TournamentRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "mean_kind", "cov_kind", "beta", "episodes", "a_wins", "b_wins", "draws", "b_win_pct",
    ])
    .map_err(csv_err)?;
    for row in rows {
        let s = &row.stats;
        out.write_record([
            row.mean_kind.clone(),
            row.cov_kind.clone(),
            s.beta.to_string(),
            s.episodes.to_string(),
            s.a_wins.to_string(),
            s.b_wins.to_string(),
            s.draws.to_string(),
            s.b_win_pct_of_decisive().map(|p| format!("{p:.2}")).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes with `f` into a buffered file at `path`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn open_file(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}
