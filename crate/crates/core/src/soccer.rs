//! The grid-soccer games.
//!
//! Squares are numbered row-major from 1: square `(row - 1) * cols + col`, rows
//! top to bottom and columns left to right. Player A attacks the left edge and
//! player B the right edge.
//!
//! A state is `(pos_a, pos_b, possession)` and is stored at index
//! `((pos_a - 1) * S + (pos_b - 1)) * 2 + possession` with `S = rows * cols`,
//! possession A = 0 and B = 1.
//!
//! Dynamics per step:
//!
//! * Moves off the grid leave the player in place.
//! * If both players end on the same square, possession flips with
//!   probability `beta`. Passing through each other does not trigger an
//!   exchange.
//! * A state in which the ball holder stands on one of its goal squares is a
//!   scoring state. Its reward (+1 for A, -1 for B) is collected in that
//!   state and every joint action leads to the reset distribution: initial
//!   positions with possession drawn uniformly.
//! * In the shoot variant the holder may shoot. The shot is worth the
//!   holder's PSS at its square in expectation (reward `+PSS_A` or `-PSS_B`)
//!   and the board resets afterwards whether it went in or not. A shot by the
//!   player without the ball is a `stand`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_gamma, MarkovGame, TransitionKernel};
use crate::layout::{RewardLayout, RewardVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Possession {
    A,
    B,
}

impl Possession {
    pub fn flipped(self) -> Self {
        match self {
            Possession::A => Possession::B,
            Possession::B => Possession::A,
        }
    }

    fn bit(self) -> usize {
        match self {
            Possession::A => 0,
            Possession::B => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
    Stand,
    Shoot,
}

impl Action {
    pub const MOVES: [Action; 5] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Stand,
    ];
    pub const WITH_SHOOT: [Action; 6] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Stand,
        Action::Shoot,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Action::North => "N",
            Action::South => "S",
            Action::East => "E",
            Action::West => "W",
            Action::Stand => "stand",
            Action::Shoot => "shoot",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub goal_squares_a: Vec<usize>,
    pub goal_squares_b: Vec<usize>,
    pub initial_pos_a: usize,
    pub initial_pos_b: usize,
}

impl GridSpec {
    /// The 4x5 field: A scores on 6 or 11, B on 10 or 15; A kicks off from 9
    /// and B from 12.
    pub fn standard() -> Self {
        Self {
            rows: 4,
            cols: 5,
            goal_squares_a: vec![6, 11],
            goal_squares_b: vec![10, 15],
            initial_pos_a: 9,
            initial_pos_b: 12,
        }
    }

    /// 2x2 analogue used for fast runs: A scores in the left column, B in the
    /// right column, each starting in its own defensive column.
    pub fn small() -> Self {
        Self {
            rows: 2,
            cols: 2,
            goal_squares_a: vec![1, 3],
            goal_squares_b: vec![2, 4],
            initial_pos_a: 2,
            initial_pos_b: 3,
        }
    }

    pub fn n_squares(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_states(&self) -> usize {
        self.n_squares() * self.n_squares() * 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGrid("rows and cols must be positive".into()));
        }
        let n = self.n_squares();
        let in_range = |field: &str, sq: usize| -> Result<()> {
            if sq == 0 || sq > n {
                Err(Error::InvalidGrid(format!(
                    "{field}: square {sq} outside 1..={n}"
                )))
            } else {
                Ok(())
            }
        };
        for &sq in &self.goal_squares_a {
            in_range("goal_squares_a", sq)?;
        }
        for &sq in &self.goal_squares_b {
            in_range("goal_squares_b", sq)?;
        }
        in_range("initial_pos_a", self.initial_pos_a)?;
        in_range("initial_pos_b", self.initial_pos_b)?;
        if self.goal_squares_a.is_empty() || self.goal_squares_b.is_empty() {
            return Err(Error::InvalidGrid("each player needs a goal square".into()));
        }
        if let Some(sq) = self
            .goal_squares_a
            .iter()
            .find(|sq| self.goal_squares_b.contains(sq))
        {
            return Err(Error::InvalidGrid(format!(
                "goal_squares_a and goal_squares_b share square {sq}"
            )));
        }
        if self.goal_squares_a.contains(&self.initial_pos_a) {
            return Err(Error::InvalidGrid(format!(
                "initial_pos_a {} is one of A's goal squares",
                self.initial_pos_a
            )));
        }
        if self.goal_squares_b.contains(&self.initial_pos_b) {
            return Err(Error::InvalidGrid(format!(
                "initial_pos_b {} is one of B's goal squares",
                self.initial_pos_b
            )));
        }
        Ok(())
    }

    /// `(row, col)`, both 1-based.
    pub fn row_col(&self, square: usize) -> (usize, usize) {
        ((square - 1) / self.cols + 1, (square - 1) % self.cols + 1)
    }

    pub fn square(&self, row: usize, col: usize) -> usize {
        (row - 1) * self.cols + col
    }

    /// Square reached by `action`; blocked moves stay put.
    pub fn step(&self, square: usize, action: Action) -> usize {
        let (r, c) = self.row_col(square);
        let (r, c) = match action {
            Action::North if r > 1 => (r - 1, c),
            Action::South if r < self.rows => (r + 1, c),
            Action::East if c < self.cols => (r, c + 1),
            Action::West if c > 1 => (r, c - 1),
            _ => (r, c),
        };
        self.square(r, c)
    }

    /// Point reflection through the centre of the field.
    pub fn rotate(&self, square: usize) -> usize {
        self.n_squares() + 1 - square
    }

    /// Squares of the leftmost column, top to bottom.
    pub fn left_column(&self) -> Vec<usize> {
        (1..=self.rows).map(|r| self.square(r, 1)).collect()
    }

    /// Squares of the rightmost column, top to bottom.
    pub fn right_column(&self) -> Vec<usize> {
        (1..=self.rows).map(|r| self.square(r, self.cols)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub pos_a: usize,
    pub pos_b: usize,
    pub possession: Possession,
}

impl GameState {
    pub fn holder_pos(&self) -> usize {
        match self.possession {
            Possession::A => self.pos_a,
            Possession::B => self.pos_b,
        }
    }
}

pub fn encode_state(grid: &GridSpec, state: GameState) -> Result<usize> {
    let n = grid.n_squares();
    for (what, sq) in [("pos_a", state.pos_a), ("pos_b", state.pos_b)] {
        if sq == 0 || sq > n {
            return Err(Error::OutOfRange {
                what,
                index: sq,
                limit: n,
            });
        }
    }
    Ok(((state.pos_a - 1) * n + (state.pos_b - 1)) * 2 + state.possession.bit())
}

pub fn decode_state(grid: &GridSpec, index: usize) -> Result<GameState> {
    let n = grid.n_squares();
    if index >= grid.n_states() {
        return Err(Error::OutOfRange {
            what: "state index",
            index,
            limit: grid.n_states(),
        });
    }
    let possession = if index % 2 == 0 {
        Possession::A
    } else {
        Possession::B
    };
    let pair = index / 2;
    Ok(GameState {
        pos_a: pair / n + 1,
        pos_b: pair % n + 1,
        possession,
    })
}

/// Probability of a successful shot from each square, for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PssTable {
    values: Vec<f64>,
}

impl PssTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::param("pss", format!("square {} has value {v}", i + 1)));
        }
        Ok(Self { values })
    }

    fn from_groups(n_squares: usize, groups: &[(f64, &[usize])]) -> Self {
        let mut values = vec![f64::NAN; n_squares];
        for &(p, squares) in groups {
            for &sq in squares {
                values[sq - 1] = p;
            }
        }
        debug_assert!(values.iter().all(|v| !v.is_nan()));
        Self { values }
    }

    /// Player A's table on the 4x5 field.
    pub fn standard_a() -> Self {
        Self::from_groups(
            20,
            &[
                (1.0, &[6, 11]),
                (0.7, &[1, 7, 12, 16]),
                (0.5, &[2, 8, 13, 17]),
                (0.3, &[3, 9, 14, 18]),
                (0.1, &[4, 10, 15, 19]),
                (0.0, &[5, 20]),
            ],
        )
    }

    /// Player B's table on the 4x5 field.
    pub fn standard_b() -> Self {
        Self::from_groups(
            20,
            &[
                (1.0, &[10, 15]),
                (0.7, &[5, 9, 14, 20]),
                (0.5, &[4, 8, 13, 19]),
                (0.3, &[3, 7, 12, 18]),
                (0.1, &[2, 6, 11, 17]),
                (0.0, &[1, 16]),
            ],
        )
    }

    /// Player A's table on the 2x2 field: certain from the goal column, weaker
    /// from the far column.
    pub fn small_a() -> Self {
        Self::from_groups(4, &[(1.0, &[1, 3]), (0.5, &[2]), (0.3, &[4])])
    }

    /// Player B's table on the 2x2 field; the point reflection of A's.
    pub fn small_b() -> Self {
        Self::from_groups(4, &[(1.0, &[2, 4]), (0.5, &[3]), (0.3, &[1])])
    }

    pub fn get(&self, square: usize) -> f64 {
        self.values[square - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Simple,
    Shoot,
}

/// Everything needed to rebuild a soccer game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoccerConfig {
    pub variant: Variant,
    pub grid: GridSpec,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pss_a: Option<PssTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pss_b: Option<PssTable>,
}

impl SoccerConfig {
    pub fn simple(grid: GridSpec, beta: f64, gamma: f64) -> Self {
        Self {
            variant: Variant::Simple,
            grid,
            beta,
            gamma,
            pss_a: None,
            pss_b: None,
        }
    }

    /// Shoot variant; PSS tables default to the ones matching the grid size.
    pub fn shoot(grid: GridSpec, beta: f64, gamma: f64) -> Self {
        let (a, b) = if grid == GridSpec::small() {
            (PssTable::small_a(), PssTable::small_b())
        } else {
            (PssTable::standard_a(), PssTable::standard_b())
        };
        Self {
            variant: Variant::Shoot,
            grid,
            beta,
            gamma,
            pss_a: Some(a),
            pss_b: Some(b),
        }
    }

    pub fn build(&self) -> Result<SoccerGame> {
        match self.variant {
            Variant::Simple => build_simple_soccer(&self.grid, self.beta, self.gamma),
            Variant::Shoot => {
                let (a, b) = match (&self.pss_a, &self.pss_b) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::param(
                            "pss",
                            "the shoot variant needs PSS tables for both players",
                        ))
                    }
                };
                build_shoot_soccer(&self.grid, self.beta, self.gamma, a, b)
            }
        }
    }
}

/// A soccer game: the generic Markov game plus the board it was built from.
#[derive(Debug, Clone)]
pub struct SoccerGame {
    config: SoccerConfig,
    game: MarkovGame,
}

pub fn build_simple_soccer(grid: &GridSpec, beta: f64, gamma: f64) -> Result<SoccerGame> {
    build(SoccerConfig::simple(grid.clone(), beta, gamma))
}

pub fn build_shoot_soccer(
    grid: &GridSpec,
    beta: f64,
    gamma: f64,
    pss_a: &PssTable,
    pss_b: &PssTable,
) -> Result<SoccerGame> {
    let mut cfg = SoccerConfig::simple(grid.clone(), beta, gamma);
    cfg.variant = Variant::Shoot;
    cfg.pss_a = Some(pss_a.clone());
    cfg.pss_b = Some(pss_b.clone());
    build(cfg)
}

fn build(config: SoccerConfig) -> Result<SoccerGame> {
    let grid = &config.grid;
    grid.validate()?;
    if !(0.0..=1.0).contains(&config.beta) {
        return Err(Error::param("beta", format!("{} is not in [0, 1]", config.beta)));
    }
    check_gamma(config.gamma)?;
    let shoot = config.variant == Variant::Shoot;
    if shoot {
        for (name, t) in [("pss_a", &config.pss_a), ("pss_b", &config.pss_b)] {
            match t {
                Some(t) if t.len() == grid.n_squares() => {}
                Some(t) => {
                    return Err(Error::param(
                        "pss",
                        format!("{name} has {} squares, grid has {}", t.len(), grid.n_squares()),
                    ))
                }
                None => return Err(Error::param("pss", format!("{name} missing"))),
            }
        }
    }
    let actions: &[Action] = if shoot {
        &Action::WITH_SHOOT
    } else {
        &Action::MOVES
    };
    let n = grid.n_states();
    let m = actions.len();
    let states: Vec<GameState> = (0..n).map(|i| decode_state(grid, i)).collect::<Result<_>>()?;
    let reset = reset_states(grid);
    let scoring: Vec<bool> = states.iter().map(|s| is_scoring(grid, s)).collect();

    let kernel = TransitionKernel::from_fn(n, m, |s, a1, a2| {
        let st = states[s];
        if scoring[s] {
            return reset.to_vec();
        }
        let holder_action = match st.possession {
            Possession::A => actions[a1],
            Possession::B => actions[a2],
        };
        if holder_action == Action::Shoot {
            return reset.to_vec();
        }
        let pa = grid.step(st.pos_a, actions[a1]);
        let pb = grid.step(st.pos_b, actions[a2]);
        let kept = encode(grid, pa, pb, st.possession);
        if pa == pb {
            let flipped = encode(grid, pa, pb, st.possession.flipped());
            vec![(flipped, config.beta), (kept, 1.0 - config.beta)]
        } else {
            vec![(kept, 1.0)]
        }
    })?;

    let rewards = if shoot {
        let pss_a = config.pss_a.as_ref().expect("checked above");
        let pss_b = config.pss_b.as_ref().expect("checked above");
        let layout = RewardLayout::StateJointAction {
            n_states: n,
            n_actions: m,
        };
        let shoot_idx = m - 1;
        let mut r = vec![0.0; layout.len()];
        for (s, st) in states.iter().enumerate() {
            for a1 in 0..m {
                for a2 in 0..m {
                    r[layout.index(s, a1, a2)] = if scoring[s] {
                        score_value(st.possession)
                    } else {
                        match st.possession {
                            Possession::A if a1 == shoot_idx => pss_a.get(st.pos_a),
                            Possession::B if a2 == shoot_idx => -pss_b.get(st.pos_b),
                            _ => 0.0,
                        }
                    };
                }
            }
        }
        RewardVector::new(layout, r)?
    } else {
        let layout = RewardLayout::StateOnly { n_states: n };
        let r = states
            .iter()
            .zip(&scoring)
            .map(|(st, &sc)| if sc { score_value(st.possession) } else { 0.0 })
            .collect();
        RewardVector::new(layout, r)?
    };

    let game = MarkovGame::new(kernel, rewards, config.gamma)?;
    Ok(SoccerGame { config, game })
}

fn score_value(p: Possession) -> f64 {
    match p {
        Possession::A => 1.0,
        Possession::B => -1.0,
    }
}

fn encode(grid: &GridSpec, pa: usize, pb: usize, p: Possession) -> usize {
    ((pa - 1) * grid.n_squares() + (pb - 1)) * 2 + p.bit()
}

fn reset_states(grid: &GridSpec) -> [(usize, f64); 2] {
    [
        (encode(grid, grid.initial_pos_a, grid.initial_pos_b, Possession::A), 0.5),
        (encode(grid, grid.initial_pos_a, grid.initial_pos_b, Possession::B), 0.5),
    ]
}

fn is_scoring(grid: &GridSpec, st: &GameState) -> bool {
    match st.possession {
        Possession::A => grid.goal_squares_a.contains(&st.pos_a),
        Possession::B => grid.goal_squares_b.contains(&st.pos_b),
    }
}

impl SoccerGame {
    pub fn game(&self) -> &MarkovGame {
        &self.game
    }

    pub fn config(&self) -> &SoccerConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridSpec {
        &self.config.grid
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn actions(&self) -> &'static [Action] {
        match self.config.variant {
            Variant::Simple => &Action::MOVES,
            Variant::Shoot => &Action::WITH_SHOOT,
        }
    }

    /// Index of the shoot action, if the variant has one.
    pub fn shoot_action(&self) -> Option<usize> {
        match self.config.variant {
            Variant::Simple => None,
            Variant::Shoot => Some(Action::WITH_SHOOT.len() - 1),
        }
    }

    pub fn pss(&self) -> Option<(&PssTable, &PssTable)> {
        match (&self.config.pss_a, &self.config.pss_b) {
            (Some(a), Some(b)) if self.config.variant == Variant::Shoot => Some((a, b)),
            _ => None,
        }
    }

    /// Same board with a different exchange probability.
    pub fn with_beta(&self, beta: f64) -> Result<SoccerGame> {
        let mut cfg = self.config.clone();
        cfg.beta = beta;
        cfg.build()
    }

    pub fn n_states(&self) -> usize {
        self.game.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.game.n_actions()
    }

    pub fn encode(&self, state: GameState) -> Result<usize> {
        encode_state(&self.config.grid, state)
    }

    pub fn decode(&self, index: usize) -> Result<GameState> {
        decode_state(&self.config.grid, index)
    }

    pub fn is_scoring(&self, index: usize) -> bool {
        let st = decode_state(&self.config.grid, index).expect("state index in range");
        is_scoring(&self.config.grid, &st)
    }

    /// The two kick-off states (possession A, possession B), each with probability 1/2.
    pub fn reset_distribution(&self) -> [(usize, f64); 2] {
        reset_states(&self.config.grid)
    }
}
