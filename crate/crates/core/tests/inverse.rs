use mirl_core::equilibrium::{evaluate_bipolicy, minimax_bipolicy, DEFAULT_MAX_ITERS};
use mirl_core::irl::*;
use mirl_core::mirl::*;
use mirl_core::prior::{build_prior, CovKind, MeanKind, PriorSpec};
use mirl_core::soccer::{GridSpec, SoccerConfig, SoccerGame};
use mirl_core::solvers::Sense;
use mirl_core::testutil::{random_bipolicy, random_game, random_policy};
use mirl_core::{Bipolicy, Player, RewardLayout, RewardVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 0.9;

fn equilibrium(g: &SoccerGame) -> Bipolicy {
    minimax_bipolicy(g.game(), g.game().rewards(), GAMMA, 1e-10, DEFAULT_MAX_ITERS)
        .unwrap()
        .0
}

fn small_shoot() -> SoccerGame {
    SoccerConfig::shoot(GridSpec::small(), 0.6, GAMMA).build().unwrap()
}

fn joint_layout(g: &SoccerGame) -> RewardLayout {
    RewardLayout::StateJointAction {
        n_states: g.n_states(),
        n_actions: g.n_actions(),
    }
}

fn state_action_layout(g: &SoccerGame) -> RewardLayout {
    RewardLayout::StateAction {
        n_states: g.n_states(),
        n_actions: g.n_actions(),
    }
}

fn as_vector(r: &RewardVector) -> DVector<f64> {
    DVector::from_column_slice(r.values())
}

#[test]
fn true_rewards_satisfy_state_constraints_at_full_scale() {
    let g = SoccerConfig::simple(GridSpec::standard(), 0.6, GAMMA).build().unwrap();
    let bp = equilibrium(&g);
    let c = state_constraints(g.game(), &bp, GAMMA).unwrap();
    assert_eq!(c.n_rows(), 2 * 5 * 800);
    assert_eq!(c.layout.len(), 800);
    let min = c.min_residual(g.game().rewards().values()).unwrap();
    assert!(min >= -1e-6, "{min}");
}

#[test]
fn true_rewards_satisfy_joint_and_irl_constraints() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let joint = joint_constraints(g.game(), &bp, GAMMA).unwrap();
    assert_eq!(joint.layout.len(), 32 * 36);
    assert!(joint.min_residual(g.game().rewards().values()).unwrap() >= -1e-6);
    let r_pi2 = marginalize_rewards(g.game().rewards(), bp.pi2()).unwrap();
    let irl = irl_constraints(g.game(), &bp, GAMMA).unwrap();
    assert_eq!((irl.n_rows(), irl.layout.len()), (6 * 32, 32 * 6));
    assert!(irl.min_residual(r_pi2.values()).unwrap() >= -1e-6);
}

#[test]
fn feasible_prior_means_are_returned() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let truth = g.game().rewards();
    let n = truth.len();
    let rec = recover_joint_rewards(g.game(), &bp, &as_vector(truth), &DMatrix::identity(n, n), GAMMA, 1e-9).unwrap();
    assert!(rec.rewards.l2_distance(truth).unwrap() <= 1e-9);
    let r_pi2 = marginalize_rewards(truth, bp.pi2()).unwrap();
    let k = r_pi2.len();
    let rec = recover_irl_rewards(g.game(), &bp, &as_vector(&r_pi2), &DMatrix::identity(k, k), GAMMA, 1e-9).unwrap();
    assert!(rec.rewards.l2_distance(&r_pi2).unwrap() <= 1e-9);
}

/// With no discount, a deviation row compares the deviating player's expected
/// immediate reward against the mixture, which is easy to write out directly.
#[test]
fn undiscounted_joint_constraints_compare_immediate_rewards() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let m = 3;
    let game = random_game(&mut rng, 1, m, 0.5);
    let bp = random_bipolicy(&mut rng, 1, m);
    let c = joint_constraints(&game, &bp, 0.0).unwrap();
    let r: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let at = |a1: usize, a2: usize| r[a1 * m + a2];
    let (x, y) = (bp.pi1(), bp.pi2());
    let mixed: f64 = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| x[(0, i)] * y[(0, j)] * at(i, j)).sum();
    let residuals = c.residuals(&r).unwrap();
    for (k, tag) in c.blocks.iter().enumerate() {
        let deviation: f64 = match tag.player {
            Player::One => (0..m).map(|j| y[(0, j)] * at(tag.action, j)).sum(),
            Player::Two => (0..m).map(|i| x[(0, i)] * at(i, tag.action)).sum(),
        };
        // residuals are positive when satisfied: mixed - dev for player 1, dev - mixed for player 2
        let want = match tag.player {
            Player::One => mixed - deviation,
            Player::Two => deviation - mixed,
        };
        assert!((residuals[k] - want).abs() <= 1e-14, "{tag:?}");
    }
}

#[test]
fn undiscounted_irl_constraints_compare_immediate_rewards() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let (n, m) = (4, 3);
    for _ in 0..10 {
        let game = random_game(&mut rng, n, m, 0.5);
        let bp = random_bipolicy(&mut rng, n, m);
        let c = irl_constraints(&game, &bp, 0.0).unwrap();
        let r: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let residuals = c.residuals(&r).unwrap();
        for (b, tag) in c.blocks.iter().enumerate() {
            for s in 0..n {
                let mixed: f64 = (0..m).map(|a| bp.pi1()[(s, a)] * r[a * n + s]).sum();
                let want = mixed - r[tag.action * n + s];
                assert!((residuals[b * n + s] - want).abs() <= 1e-14);
            }
        }
    }
}

#[test]
fn weak_mean_round_trip_on_small_simple_game() {
    let g = SoccerConfig::simple(GridSpec::small(), 0.6, GAMMA).build().unwrap();
    let bp = equilibrium(&g);
    let layout = RewardLayout::StateOnly { n_states: 32 };
    let (mu, sigma) = build_prior(&PriorSpec::new(MeanKind::Weak, CovKind::Identity), &g, layout).unwrap();
    let rec = recover_state_rewards(g.game(), &bp, &mu, &sigma, GAMMA, 1e-9).unwrap();
    assert_eq!(rec.rewards.len(), 32);
    assert!(rec.constraints_min_residual >= -1e-6);
    // the observed bipolicy is an equilibrium of the recovered game
    let (_, minimax) = minimax_bipolicy(g.game(), &rec.rewards, GAMMA, 1e-10, DEFAULT_MAX_ITERS).unwrap();
    let observed = evaluate_bipolicy(g.game(), &rec.rewards, &bp, GAMMA).unwrap();
    assert!(minimax.max_abs_diff(&observed) <= 0.05, "{}", minimax.max_abs_diff(&observed));
}

#[test]
fn irl_recovery_is_optimal_but_misses_the_truth() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let (mu, sigma) =
        build_prior(&PriorSpec::new(MeanKind::Weak, CovKind::Strong), &g, state_action_layout(&g)).unwrap();
    let rec = recover_irl_rewards(g.game(), &bp, &mu, &sigma, GAMMA, 1e-9).unwrap();
    let mdp = induce_mdp(g.game(), bp.pi2(), GAMMA).unwrap();
    // the observed policy cannot be improved under the recovered rewards
    assert!(mdp.improvement_gain(&rec.rewards, bp.pi1()).unwrap() <= 1e-6);
    // but the policy those rewards make optimal does worse under the true rewards
    let (greedy, _) = mdp.solve(&rec.rewards, 1e-12, 100_000).unwrap();
    let truth = marginalize_rewards(g.game().rewards(), bp.pi2()).unwrap();
    let observed = mdp.evaluate(&truth, bp.pi1()).unwrap();
    let relearned = mdp.evaluate(&truth, &greedy).unwrap();
    assert!((&observed - &relearned).amax() > 1e-3);
    assert!((&relearned - &observed).max() <= 1e-9);
}

#[test]
fn feasible_irl_rewards_admit_no_improvement() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..10 {
        let game = random_game(&mut rng, 5, 3, 0.8);
        let bp = random_bipolicy(&mut rng, 5, 3);
        let mu = DVector::from_fn(15, |_, _| rng.gen_range(-1.0..1.0));
        let rec = recover_irl_rewards(&game, &bp, &mu, &DMatrix::identity(15, 15), 0.8, 1e-10).unwrap();
        let mdp = induce_mdp(&game, bp.pi2(), 0.8).unwrap();
        assert!(mdp.improvement_gain(&rec.rewards, bp.pi1()).unwrap() <= 1e-8);
    }
}

#[test]
fn induced_kernel_is_the_pi2_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(54);
    let game = random_game(&mut rng, 6, 3, 0.8);
    let pi2 = random_policy(&mut rng, 6, 3);
    let mdp = induce_mdp(&game, &pi2, 0.8).unwrap();
    for a1 in 0..3 {
        let p = mdp.transition(a1);
        for s in 0..6 {
            let mut want = vec![0.0; 6];
            for a2 in 0..3 {
                for (t, q) in game.transition_dist(s, a1, a2).unwrap().into_iter().enumerate() {
                    want[t] += pi2[(s, a2)] * q;
                }
            }
            for t in 0..6 {
                assert!((p[(s, t)] - want[t]).abs() <= 1e-14);
            }
            assert!((p.row(s).sum() - 1.0).abs() <= 1e-9);
        }
    }
    // a pure opponent selects a slice of the joint kernel
    let pure = DMatrix::from_fn(6, 3, |_, a| if a == 2 { 1.0 } else { 0.0 });
    let mdp = induce_mdp(&game, &pure, 0.8).unwrap();
    for s in 0..6 {
        let want = game.transition_dist(s, 1, 2).unwrap();
        for t in 0..6 {
            assert_eq!(mdp.transition(1)[(s, t)], want[t]);
        }
    }
}

#[test]
fn pss_estimate_stays_within_the_noise() {
    let g = SoccerConfig::shoot(GridSpec::standard(), 0.6, GAMMA).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let delta = 0.2;
    let truth = g.game().rewards();
    let noisy: Vec<f64> = truth.values().iter().map(|x| x + rng.gen_range(-delta..delta)).collect();
    let noisy = RewardVector::new(truth.layout(), noisy).unwrap();
    let est = extract_pss(&noisy, &g).unwrap();
    for (e, t) in est.estimate_a.iter().zip(&est.truth_a) {
        assert!((e - t).abs() <= delta);
    }
    for (e, t) in est.estimate_b.unwrap().iter().zip(&est.truth_b) {
        assert!((e - t).abs() <= delta);
    }
}

#[test]
fn true_rewards_give_exact_pss_for_both_players() {
    let g = SoccerConfig::shoot(GridSpec::standard(), 0.6, GAMMA).build().unwrap();
    let est = extract_pss(g.game().rewards(), &g).unwrap();
    assert_eq!(est.squares.len(), 20);
    assert_eq!(est.mae_a(), 0.0);
    assert_eq!(est.mae_b(), Some(0.0));
    assert_eq!(est.estimate_a[5], 1.0);
}

#[test]
fn stronger_means_land_closer_to_the_truth() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let truth = g.game().rewards();
    for cov in [CovKind::Identity, CovKind::Strong] {
        let distance = |mean| {
            let (mu, sigma) = build_prior(&PriorSpec::new(mean, cov), &g, joint_layout(&g)).unwrap();
            let rec = recover_joint_rewards(g.game(), &bp, &mu, &sigma, GAMMA, 1e-9).unwrap();
            rec.rewards.l2_distance(truth).unwrap()
        };
        let weak = distance(MeanKind::Weak);
        let strong = distance(MeanKind::Strong);
        assert!(strong <= weak, "{cov}: strong {strong} vs weak {weak}");
    }
}

#[test]
fn recovery_reports_program_sizes() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let (mu, sigma) = build_prior(&PriorSpec::new(MeanKind::Median, CovKind::Strong), &g, joint_layout(&g)).unwrap();
    let rec = recover_joint_rewards(g.game(), &bp, &mu, &sigma, GAMMA, 1e-9).unwrap();
    assert_eq!(rec.rewards.layout(), joint_layout(&g));
    assert!(rec.solution.kkt_residual <= 1e-6);
    assert!(rec.constraints_min_residual >= -1e-6);
}

#[test]
fn wrong_prior_length_is_rejected() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let mu = DVector::zeros(10);
    assert!(recover_joint_rewards(g.game(), &bp, &mu, &DMatrix::identity(10, 10), GAMMA, 1e-9).is_err());
}

#[test]
fn joint_rows_carry_the_paper_orientation() {
    let g = small_shoot();
    let bp = equilibrium(&g);
    let c = joint_constraints(g.game(), &bp, GAMMA).unwrap();
    for (k, tag) in c.blocks.iter().enumerate() {
        let want = match tag.player {
            Player::One => Sense::Le,
            Player::Two => Sense::Ge,
        };
        assert!(c.senses[k * 32..(k + 1) * 32].iter().all(|&s| s == want));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn minimax_play_makes_the_truth_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&mut rng, 5, 3, 0.85);
        let (bp, _) = minimax_bipolicy(&game, game.rewards(), 0.85, 1e-12, 10_000).unwrap();
        let joint = joint_constraints(&game, &bp, 0.85).unwrap();
        prop_assert!(joint.min_residual(game.rewards().values()).unwrap() >= -1e-6);
        let r_pi2 = marginalize_rewards(game.rewards(), bp.pi2()).unwrap();
        let irl = irl_constraints(&game, &bp, 0.85).unwrap();
        prop_assert!(irl.min_residual(r_pi2.values()).unwrap() >= -1e-6);
        // state-only rewards of the same kernel
        let state = RewardVector::new(RewardLayout::StateOnly { n_states: 5 },
            (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (bp, _) = minimax_bipolicy(&game, &state, 0.85, 1e-12, 10_000).unwrap();
        let c = state_constraints(&game, &bp, 0.85).unwrap();
        prop_assert!(c.min_residual(state.values()).unwrap() >= -1e-6);
    }

    #[test]
    fn marginalization_matches_summation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&mut rng, 4, 3, 0.5);
        let pi2 = random_policy(&mut rng, 4, 3);
        let out = marginalize_rewards(game.rewards(), &pi2).unwrap();
        prop_assert_eq!(out.len(), 12);
        for s in 0..4 {
            for a1 in 0..3 {
                let want: f64 = (0..3).map(|a2| pi2[(s, a2)] * game.rewards().joint(s, a1, a2)).sum();
                prop_assert!((out.joint(s, a1, 0) - want).abs() <= 1e-14);
            }
        }
    }
}
