use mirl_core::equilibrium::*;
use mirl_core::montecarlo::estimate_value;
use mirl_core::soccer::{GridSpec, SoccerConfig};
use mirl_core::testutil::{random_bipolicy, random_game};
use mirl_core::{Error, RewardLayout, RewardVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Equalizing strategy on a square block: solves `[B' 1; 1' 0] (x, -v) = (0, 1)`.
fn equalizer(block: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let k = block.nrows();
    let mut sys = DMatrix::zeros(k + 1, k + 1);
    sys.view_mut((0, 0), (k, k)).copy_from(block);
    for i in 0..k {
        sys[(i, k)] = -1.0;
        sys[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    Some((sol.rows(0, k).into_owned(), sol[k]))
}

/// Value of a matrix game by support enumeration over square subgames: every
/// extreme optimal pair lives on a square block on which both players equalize.
fn support_oracle(p: &DMatrix<f64>) -> f64 {
    let (rows, cols) = p.shape();
    for k in 1..=rows.min(cols) {
        for ri in subsets(rows, k) {
            for ci in subsets(cols, k) {
                let block = p.select_rows(&ri).select_columns(&ci);
                let Some((x, v1)) = equalizer(&block.transpose()) else { continue };
                let Some((y, v2)) = equalizer(&block) else { continue };
                if (v1 - v2).abs() > 1e-9 || x.min() < -1e-12 || y.min() < -1e-12 {
                    continue;
                }
                let mut full_x = DVector::zeros(rows);
                let mut full_y = DVector::zeros(cols);
                ri.iter().zip(x.iter()).for_each(|(&i, &w)| full_x[i] = w);
                ci.iter().zip(y.iter()).for_each(|(&j, &w)| full_y[j] = w);
                let guard_row = (p.transpose() * &full_x).min();
                let guard_col = (p * &full_y).max();
                if guard_row >= v1 - 1e-9 && guard_col <= v1 + 1e-9 {
                    return v1;
                }
            }
        }
    }
    panic!("no equilibrium found for {p}");
}

#[test]
fn matching_pennies() {
    let p = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let sol = solve_matrix_game(&p, 1e-10).unwrap();
    assert!(sol.value.abs() <= 1e-8);
    for s in [&sol.strategy1, &sol.strategy2] {
        assert!((s[0] - 0.5).abs() <= 1e-8 && (s[1] - 0.5).abs() <= 1e-8);
    }
}

#[test]
fn rock_paper_scissors() {
    let p = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0]);
    let sol = solve_matrix_game(&p, 1e-10).unwrap();
    assert!(sol.value.abs() <= 1e-8);
    for s in [&sol.strategy1, &sol.strategy2] {
        assert!(s.iter().all(|x| (x - 1.0 / 3.0).abs() <= 1e-8));
    }
}

#[test]
fn random_integer_games_match_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let p = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-5..=5) as f64);
        let sol = solve_matrix_game(&p, 1e-10).unwrap();
        let want = support_oracle(&p);
        assert!((sol.value - want).abs() <= 1e-7, "{p}: {} vs {want}", sol.value);
    }
}

#[test]
fn rectangular_games_match_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let p = DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let sol = solve_matrix_game(&p, 1e-10).unwrap();
        assert!((sol.value - support_oracle(&p)).abs() <= 1e-7);
    }
}

#[test]
fn small_soccer_has_no_profitable_deviation() {
    for cfg in [
        SoccerConfig::simple(GridSpec::small(), 0.6, 0.9),
        SoccerConfig::shoot(GridSpec::small(), 0.6, 0.9),
    ] {
        let g = cfg.build().unwrap();
        let r = g.game().rewards();
        let (bp, v) = minimax_bipolicy(g.game(), r, 0.9, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let audit = deviation_audit(g.game(), r, &bp, 0.9).unwrap();
        assert!(audit.max_gain() <= 1e-6, "{audit:?}");
        // the iterated value is the value of the returned bipolicy
        let direct = evaluate_bipolicy(g.game(), r, &bp, 0.9).unwrap();
        assert!(direct.max_abs_diff(&v) <= DEFAULT_TOL * 1.9 / 0.1);
    }
}

#[test]
fn single_state_game_reduces_to_one_matrix_game() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let game = random_game(&mut rng, 1, 3, 0.8);
    let (_, v) = minimax_bipolicy(&game, game.rewards(), 0.8, 1e-12, 10_000).unwrap();
    let stage = DMatrix::from_fn(3, 3, |a1, a2| game.rewards().joint(0, a1, a2));
    let once = solve_matrix_game(&stage, 1e-12).unwrap().value;
    assert!((v.get(0) - once / 0.2).abs() <= 1e-9);
}

#[test]
fn evaluation_without_discount_is_immediate_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let game = random_game(&mut rng, 4, 3, 0.5);
    let bp = random_bipolicy(&mut rng, 4, 3);
    let v = evaluate_bipolicy(&game, game.rewards(), &bp, 0.0).unwrap();
    for s in 0..4 {
        let mut want = 0.0;
        for a1 in 0..3 {
            for a2 in 0..3 {
                want += bp.pi1()[(s, a1)] * bp.pi2()[(s, a2)] * game.rewards().joint(s, a1, a2);
            }
        }
        assert!((v.get(s) - want).abs() <= 1e-14);
    }
    let zero = RewardVector::zeros(RewardLayout::StateOnly { n_states: 4 });
    assert_eq!(evaluate_bipolicy(&game, &zero, &bp, 0.5).unwrap().values.amax(), 0.0);
}

#[test]
fn evaluation_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let gamma: f64 = 0.8;
    let horizon = (1e-6f64.ln() / gamma.ln()).ceil() as usize;
    let game = random_game(&mut rng, 4, 2, gamma);
    let bp = random_bipolicy(&mut rng, 4, 2);
    let v = evaluate_bipolicy(&game, game.rewards(), &bp, gamma).unwrap();
    for s in 0..4 {
        let (mean, se) = estimate_value(&game, game.rewards(), &bp, gamma, s, 100_000, horizon, 7 + s as u64).unwrap();
        assert!((mean - v.get(s)).abs() <= 3.0 * se, "state {s}: {mean} +- {se} vs {}", v.get(s));
    }
}

#[test]
fn value_iteration_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let game = random_game(&mut rng, 6, 3, 0.9);
    let residual = |k| match shapley_iteration(&game, game.rewards(), 0.9, 1e-300, k) {
        Err(Error::NotConverged { residual, .. }) => residual,
        other => panic!("{other:?}"),
    };
    let mut prev = residual(1);
    for k in 2..40 {
        let next = residual(k);
        assert!(next <= 0.9 * prev + 1e-12, "sweep {k}: {next} after {prev}");
        prev = next;
    }
}

#[test]
fn stage_games_are_saddle_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let game = random_game(&mut rng, 5, 3, 0.9);
    let (bp, v) = minimax_bipolicy(&game, game.rewards(), 0.9, 1e-10, 10_000).unwrap();
    for s in 0..5 {
        let q = stage_game(&game, game.rewards(), 0.9, s, v.values.as_slice());
        let x = bp.pi1().row(s).transpose();
        let y = bp.pi2().row(s).transpose();
        let value = (x.transpose() * &q * &y)[(0, 0)];
        assert!((q.transpose() * &x).min() >= value - 1e-8);
        assert!((&q * &y).max() <= value + 1e-8);
    }
}

#[test]
fn parallel_sweeps_are_reproducible() {
    let g = SoccerConfig::shoot(GridSpec::small(), 0.6, 0.9).build().unwrap();
    let a = minimax_bipolicy(g.game(), g.game().rewards(), 0.9, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
    let b = minimax_bipolicy(g.game(), g.game().rewards(), 0.9, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.values, b.1.values);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shifting_payoffs_shifts_the_value(
        data in proptest::collection::vec(-3.0f64..3.0, 9),
        c in -5.0f64..5.0,
    ) {
        let p = DMatrix::from_vec(3, 3, data);
        let a = solve_matrix_game(&p, 1e-10).unwrap();
        let shifted = p.map(|x| x + c);
        let b = solve_matrix_game(&shifted, 1e-10).unwrap();
        prop_assert!((b.value - a.value - c).abs() <= 1e-9);
        // the returned strategies stay optimal in the shifted game
        prop_assert!((shifted.transpose() * &a.strategy1).min() >= b.value - 1e-8);
        prop_assert!((&shifted * &a.strategy2).max() <= b.value + 1e-8);
    }

    #[test]
    fn solutions_are_distributions_within_payoff_range(
        data in proptest::collection::vec(-3.0f64..3.0, 1..=36),
    ) {
        let k = (data.len() as f64).sqrt().floor() as usize;
        let p = DMatrix::from_vec(k, k, data[..k * k].to_vec());
        let sol = solve_matrix_game(&p, 1e-10).unwrap();
        for s in [&sol.strategy1, &sol.strategy2] {
            prop_assert!(s.min() >= 0.0);
            prop_assert!((s.sum() - 1.0).abs() <= 1e-9);
        }
        prop_assert!(sol.value >= p.min() - 1e-12 && sol.value <= p.max() + 1e-12);
    }

    #[test]
    fn values_are_bounded_by_the_geometric_series(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&mut rng, 4, 2, 0.75);
        let (_, v) = minimax_bipolicy(&game, game.rewards(), 0.75, 1e-10, 10_000).unwrap();
        let bound = game.rewards().max_abs() / 0.25;
        prop_assert!(v.values.amax() <= bound + 1e-9);
    }
}
