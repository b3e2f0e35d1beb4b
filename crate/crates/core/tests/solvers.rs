use mirl_core::solvers::lp::{solve_lp, LinearProgram};
use mirl_core::solvers::qp::{solve_qp, QpProblem, QpStatus};
use mirl_core::solvers::Sense;
use mirl_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best vertex of `max c.x, rows (sense) rhs, x >= 0`, by trying every choice
/// of `n` tight constraints. `None` when no vertex is feasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    // constraints 0..m are the rows, m..m+n the bounds x_j >= 0
    let total = m + n;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut k = 0;
        for c in 0..total {
            if mask & (1 << c) == 0 {
                continue;
            }
            if c < m {
                for j in 0..n {
                    a[(k, j)] = lp.rows[c][j];
                }
                b[k] = lp.rhs[c];
            } else {
                a[(k, c - m)] = 1.0;
            }
            k += 1;
        }
        if a.determinant().abs() < 1e-9 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        let feasible = x.iter().all(|&v| v >= -1e-9)
            && (0..m).all(|i| {
                let lhs: f64 = (0..n).map(|j| lp.rows[i][j] * x[j]).sum();
                match lp.senses[i] {
                    Sense::Le => lhs <= lp.rhs[i] + 1e-9,
                    Sense::Ge => lhs >= lp.rhs[i] - 1e-9,
                    Sense::Eq => (lhs - lp.rhs[i]).abs() <= 1e-9,
                }
            });
        if feasible {
            let obj: f64 = (0..n).map(|j| lp.objective[j] * x[j]).sum();
            best = Some(best.map_or(obj, |b: f64| b.max(obj)));
        }
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(-1.0..2.0)).collect());
    for _ in 0..m {
        let row = (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let sense = if rng.gen_bool(0.7) { Sense::Le } else { Sense::Ge };
        lp = lp.constraint(row, sense, rng.gen_range(-1.0..4.0));
    }
    // keeps every instance bounded
    lp.constraint(vec![1.0; n], Sense::Le, 10.0)
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut solved, mut infeasible) = (0, 0);
    for _ in 0..300 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let lp = random_lp(&mut rng, n, m);
        match (solve_lp(&lp, 1e-10), vertex_oracle(&lp)) {
            (Ok(sol), Some(best)) => {
                assert!((sol.objective - best).abs() <= 1e-7, "{lp:?}: {} vs {best}", sol.objective);
                assert!(sol.x.iter().all(|&v| v >= -1e-9));
                solved += 1;
            }
            (Err(Error::LpInfeasible), None) => infeasible += 1,
            (got, want) => panic!("{lp:?}: solver {got:?}, oracle {want:?}"),
        }
    }
    assert!(solved > 100 && infeasible > 0, "{solved} solved, {infeasible} infeasible");
}

#[test]
fn lp_duals_certify_optimality() {
    // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3
    let lp = LinearProgram::new(vec![3.0, 2.0])
        .constraint(vec![1.0, 1.0], Sense::Le, 4.0)
        .constraint(vec![1.0, 3.0], Sense::Le, 6.0)
        .constraint(vec![1.0, 0.0], Sense::Le, 3.0);
    let sol = solve_lp(&lp, 1e-10).unwrap();
    assert!((sol.objective - 11.0).abs() < 1e-12);
    let bound: f64 = sol.duals.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
    assert!((bound - sol.objective).abs() < 1e-12);
}

/// Argmin of the Gaussian-prior QP by trying every active set.
fn qp_oracle(p: &QpProblem) -> DVector<f64> {
    let m = p.a.nrows();
    let sign = |i: usize| if p.senses[i] == Sense::Ge { 1.0 } else { -1.0 };
    // rows in ">= 0" form
    let g = DMatrix::from_fn(m, p.mu.len(), |i, j| sign(i) * p.a[(i, j)]);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let (r, lambda) = if set.is_empty() {
            (p.mu.clone(), DVector::zeros(0))
        } else {
            let gs = g.select_rows(&set);
            let k = &gs * &p.sigma * gs.transpose();
            let Some(lambda) = k.lu().solve(&(-(&gs * &p.mu))) else { continue };
            (&p.mu + &p.sigma * gs.transpose() * &lambda, lambda)
        };
        if lambda.iter().any(|&l| l < -1e-9) || (&g * &r).iter().any(|&v| v < -1e-9) {
            continue;
        }
        let obj = p.objective_at(&r).unwrap();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, r));
        }
    }
    best.expect("r = 0 satisfies every homogeneous system").1
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * 0.2
}

fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = 5;
    let m = rng.gen_range(1..=8);
    let mu = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let sigma = random_spd(rng, n);
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let senses = (0..m).map(|_| if rng.gen_bool(0.5) { Sense::Ge } else { Sense::Le }).collect();
    QpProblem::new(mu, sigma, a, senses).unwrap()
}

#[test]
fn random_qps_match_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..100 {
        let p = random_qp(&mut rng);
        let sol = solve_qp(&p, 1e-10, 1000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "problem {k}");
        assert!(sol.kkt_residual < 1e-8, "problem {k}: kkt {}", sol.kkt_residual);
        let want = qp_oracle(&p);
        assert!((&sol.r - &want).amax() <= 1e-6, "problem {k}: {} vs {}", sol.r, want);
    }
}

#[test]
fn qp_beats_every_feasible_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let p = random_qp(&mut rng);
        let sol = solve_qp(&p, 1e-10, 1000).unwrap();
        let sign = |i: usize| if p.senses[i] == Sense::Ge { 1.0 } else { -1.0 };
        for _ in 0..200 {
            let x = DVector::from_fn(5, |_, _| rng.gen_range(-3.0..3.0));
            let feasible = (0..p.a.nrows()).all(|i| sign(i) * (p.a.row(i) * &x)[(0, 0)] >= 0.0);
            if feasible {
                assert!(sol.objective <= p.objective_at(&x).unwrap() + 1e-10);
            }
        }
    }
}

#[test]
fn qp_is_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let p = random_qp(&mut rng);
    let a = solve_qp(&p, 1e-10, 1000).unwrap();
    let b = solve_qp(&p, 1e-10, 1000).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_sigma_keeps_the_argmin(seed in any::<u64>(), c in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qp(&mut rng);
        let mut q = p.clone();
        q.sigma *= c;
        let a = solve_qp(&p, 1e-10, 1000).unwrap();
        let b = solve_qp(&q, 1e-10, 1000).unwrap();
        prop_assert!((&a.r - &b.r).amax() <= 1e-7);
    }

    #[test]
    fn qp_output_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qp(&mut rng);
        let sol = solve_qp(&p, 1e-10, 1000).unwrap();
        prop_assert!(sol.max_violation <= 1e-10);
        let sign = |i: usize| if p.senses[i] == Sense::Ge { 1.0 } else { -1.0 };
        for i in 0..p.a.nrows() {
            let v = sign(i) * (p.a.row(i) * &sol.r)[(0, 0)];
            prop_assert!(v >= -1e-9 * (1.0 + p.a.row(i).norm()));
        }
    }

    #[test]
    fn lp_solution_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 3, 3);
        if let Ok(sol) = solve_lp(&lp, 1e-10) {
            for (i, row) in lp.rows.iter().enumerate() {
                let lhs: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
                match lp.senses[i] {
                    Sense::Le => prop_assert!(lhs <= lp.rhs[i] + 1e-8),
                    Sense::Ge => prop_assert!(lhs >= lp.rhs[i] - 1e-8),
                    Sense::Eq => prop_assert!((lhs - lp.rhs[i]).abs() <= 1e-8),
                }
            }
        }
    }
}
