use mirl_core::soccer::{GameState, GridSpec, Possession, PssTable, SoccerConfig, SoccerGame};
use mirl_core::RewardLayout;

// Moves on the 2x2 board, written out by hand: NEXT[square - 1][action]
// for N, S, E, W, stand.
const NEXT: [[usize; 5]; 4] = [[1, 3, 2, 1, 1], [2, 4, 2, 1, 2], [1, 3, 4, 3, 3], [2, 4, 4, 3, 4]];

// Small-board goals and kick-off squares.
const GOAL_A: [usize; 2] = [1, 3];
const GOAL_B: [usize; 2] = [2, 4];
const KICKOFF: (usize, usize) = (2, 3);

fn index(pa: usize, pb: usize, b_holds: bool) -> usize {
    ((pa - 1) * 4 + (pb - 1)) * 2 + b_holds as usize
}

fn scores(pa: usize, pb: usize, b_holds: bool) -> bool {
    if b_holds {
        GOAL_B.contains(&pb)
    } else {
        GOAL_A.contains(&pa)
    }
}

/// Expected kernel row of the 2x2 game, built case by case.
fn oracle_row(s: usize, a1: usize, a2: usize, beta: f64, shoot: bool) -> Vec<f64> {
    let b_holds = s % 2 == 1;
    let pa = s / 8 + 1;
    let pb = (s / 2) % 4 + 1;
    let mut row = vec![0.0; 32];
    let holder_action = if b_holds { a2 } else { a1 };
    if scores(pa, pb, b_holds) || (shoot && holder_action == 5) {
        row[index(KICKOFF.0, KICKOFF.1, false)] += 0.5;
        row[index(KICKOFF.0, KICKOFF.1, true)] += 0.5;
        return row;
    }
    // a shot by the player without the ball is a stand
    let na = NEXT[pa - 1][a1.min(4)];
    let nb = NEXT[pb - 1][a2.min(4)];
    if na == nb {
        row[index(na, nb, !b_holds)] += beta;
        row[index(na, nb, b_holds)] += 1.0 - beta;
    } else {
        row[index(na, nb, b_holds)] += 1.0;
    }
    row
}

fn check_against_oracle(game: &SoccerGame, beta: f64, shoot: bool) {
    let m = game.n_actions();
    for s in 0..32 {
        for a1 in 0..m {
            for a2 in 0..m {
                let got = game.game().transition_dist(s, a1, a2).unwrap();
                let want = oracle_row(s, a1, a2, beta, shoot);
                for (x, y) in got.iter().zip(&want) {
                    assert!((x - y).abs() <= 1e-15, "s={s} a1={a1} a2={a2}: {got:?} vs {want:?}");
                }
            }
        }
    }
}

#[test]
fn small_simple_kernel_matches_hand_enumeration() {
    for beta in [0.0, 0.6, 1.0] {
        let g = SoccerConfig::simple(GridSpec::small(), beta, 0.9).build().unwrap();
        assert_eq!((g.n_states(), g.n_actions()), (32, 5));
        check_against_oracle(&g, beta, false);
    }
}

#[test]
fn small_shoot_kernel_matches_hand_enumeration() {
    let g = SoccerConfig::shoot(GridSpec::small(), 0.6, 0.9).build().unwrap();
    assert_eq!((g.n_states(), g.n_actions()), (32, 6));
    check_against_oracle(&g, 0.6, true);
}

fn standard(beta: f64) -> SoccerGame {
    SoccerConfig::simple(GridSpec::standard(), beta, 0.9).build().unwrap()
}

fn st(pos_a: usize, pos_b: usize, possession: Possession) -> GameState {
    GameState {
        pos_a,
        pos_b,
        possession,
    }
}

#[test]
fn kernel_rows_are_distributions() {
    for g in [
        standard(0.6),
        SoccerConfig::shoot(GridSpec::standard(), 0.6, 0.9).build().unwrap(),
    ] {
        let m = g.n_actions();
        for s in 0..g.n_states() {
            for a1 in 0..m {
                for a2 in 0..m {
                    let row = g.game().transition_dist(s, a1, a2).unwrap();
                    assert!(row.iter().all(|&p| p >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn standing_still_is_identity() {
    let g = standard(0.6);
    let s = g.encode(st(3, 18, Possession::A)).unwrap();
    let row = g.game().transition_dist(s, 4, 4).unwrap();
    assert_eq!(row[s], 1.0);
    assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 1);
}

#[test]
fn collision_flips_possession_with_beta() {
    // A moves east from 7 to 8, B moves west from 9 to 8
    for beta in [0.0, 0.6, 1.0] {
        let g = standard(beta);
        let s = g.encode(st(7, 9, Possession::A)).unwrap();
        let row = g.game().transition_dist(s, 2, 3).unwrap();
        let kept = g.encode(st(8, 8, Possession::A)).unwrap();
        let flipped = g.encode(st(8, 8, Possession::B)).unwrap();
        assert_eq!(row[flipped], beta);
        assert_eq!(row[kept], 1.0 - beta);
    }
}

#[test]
fn passing_through_does_not_exchange() {
    let g = standard(1.0);
    let s = g.encode(st(7, 8, Possession::A)).unwrap();
    let row = g.game().transition_dist(s, 2, 3).unwrap();
    assert_eq!(row[g.encode(st(8, 7, Possession::A)).unwrap()], 1.0);
}

#[test]
fn scoring_state_resets_uniformly() {
    let g = standard(0.6);
    let s = g.encode(st(6, 2, Possession::A)).unwrap();
    let a = g.encode(st(9, 12, Possession::A)).unwrap();
    let b = g.encode(st(9, 12, Possession::B)).unwrap();
    for a1 in 0..5 {
        for a2 in 0..5 {
            let row = g.game().transition_dist(s, a1, a2).unwrap();
            assert_eq!((row[a], row[b]), (0.5, 0.5));
        }
    }
}

#[test]
fn simple_reward_support() {
    let g = standard(0.6);
    let r = g.game().rewards().values();
    assert_eq!(r.iter().filter(|&&x| x == 1.0).count(), 2 * 20);
    assert_eq!(r.iter().filter(|&&x| x == -1.0).count(), 2 * 20);
    assert_eq!(r.iter().filter(|&&x| x != 0.0).count(), 80);
}

#[test]
fn shoot_rewards_from_the_pss_table() {
    let g = SoccerConfig::shoot(GridSpec::standard(), 0.6, 0.9).build().unwrap();
    let layout = RewardLayout::StateJointAction {
        n_states: 800,
        n_actions: 6,
    };
    let r = g.game().rewards();
    let at = |state, a1, a2| r.values()[layout.index(g.encode(state).unwrap(), a1, a2)];
    assert_eq!(at(st(6, 1, Possession::A), 5, 0), 1.0);
    assert_eq!(at(st(20, 1, Possession::A), 5, 3), 0.0);
    assert_eq!(at(st(2, 10, Possession::B), 1, 5), -1.0);
    // independent of the opponent's position and action
    for pb in 1..=20 {
        for a2 in 0..6 {
            assert_eq!(at(st(8, pb, Possession::A), 5, a2), 0.5);
        }
    }
    // shooting without the ball earns nothing
    assert_eq!(at(st(8, 3, Possession::B), 5, 0), 0.0);
}

#[test]
fn pss_tables_are_paper_defaults() {
    let groups_a: [(f64, &[usize]); 6] = [
        (1.0, &[6, 11]),
        (0.7, &[1, 7, 12, 16]),
        (0.5, &[2, 8, 13, 17]),
        (0.3, &[3, 9, 14, 18]),
        (0.1, &[4, 10, 15, 19]),
        (0.0, &[5, 20]),
    ];
    let groups_b: [(f64, &[usize]); 6] = [
        (1.0, &[10, 15]),
        (0.7, &[5, 9, 14, 20]),
        (0.5, &[4, 8, 13, 19]),
        (0.3, &[3, 7, 12, 18]),
        (0.1, &[2, 6, 11, 17]),
        (0.0, &[1, 16]),
    ];
    for (table, groups) in [(PssTable::standard_a(), groups_a), (PssTable::standard_b(), groups_b)] {
        assert_eq!(table.len(), 20);
        for (value, squares) in groups {
            for &q in squares {
                assert_eq!(table.get(q), value, "square {q}");
            }
        }
    }
}

/// Swapping the players, rotating the board and negating the rewards maps the
/// standard game onto itself.
#[test]
fn role_swap_symmetry() {
    for g in [
        standard(0.6),
        SoccerConfig::shoot(GridSpec::standard(), 0.6, 0.9).build().unwrap(),
    ] {
        let grid = g.grid().clone();
        let m = g.n_actions();
        // rotation by 180 degrees exchanges N/S and E/W
        let act = |a: usize| [1, 0, 3, 2, 4, 5][a];
        let map = |s: usize| {
            let x = g.decode(s).unwrap();
            g.encode(GameState {
                pos_a: grid.rotate(x.pos_b),
                pos_b: grid.rotate(x.pos_a),
                possession: x.possession.flipped(),
            })
            .unwrap()
        };
        let joint = g.game().rewards().to_joint(m).unwrap();
        for s in 0..g.n_states() {
            for a1 in 0..m {
                for a2 in 0..m {
                    let row = g.game().transition_dist(s, a1, a2).unwrap();
                    let image = g.game().transition_dist(map(s), act(a2), act(a1)).unwrap();
                    for (t, p) in row.iter().enumerate() {
                        assert_eq!(image[map(t)], *p);
                    }
                    assert_eq!(joint.joint(map(s), act(a2), act(a1)), -joint.joint(s, a1, a2));
                }
            }
        }
    }
}

#[test]
fn invalid_goal_square_names_the_field() {
    let mut grid = GridSpec::standard();
    grid.goal_squares_a = vec![6, 99];
    let err = SoccerConfig::simple(grid, 0.6, 0.9).build().unwrap_err();
    assert!(err.to_string().contains("goal_squares_a"), "{err}");
}
