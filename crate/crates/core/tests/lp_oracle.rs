use predmult::lp::{
    default_iteration_limit, solve_lp, solve_lp_with_fixings, LinearProgram, LpStatus, Relation,
};
use predmult_oracles::tableau::{minimize, Outcome, Rel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(rng: &mut ChaCha8Rng, vars: usize, rows: usize) -> LinearProgram {
    let objective = (0..vars).map(|_| rng.random_range(-5i32..=5) as f64).collect();
    let bounds = (0..vars)
        .map(|_| {
            let lo = rng.random_range(-3i32..=1) as f64;
            (lo, lo + rng.random_range(0i32..=4) as f64)
        })
        .collect();
    let mut lp = LinearProgram::new(objective, bounds);
    // Most rows are built around an anchor point so that feasible programs dominate.
    let anchor: Vec<f64> = lp
        .bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random_range(0i32..=4) as f64 / 4.0)
        .collect();
    for _ in 0..rows {
        let a: Vec<f64> = (0..vars)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(-4i32..=4) as f64
                }
            })
            .collect();
        let relation = match rng.random_range(0..5) {
            0 => Relation::Equal,
            1 | 2 => Relation::LessEq,
            _ => Relation::GreaterEq,
        };
        let activity: f64 = a.iter().zip(&anchor).map(|(x, y)| x * y).sum();
        let slack = rng.random_range(0i32..=2) as f64;
        let rhs = if rng.random_bool(0.1) {
            rng.random_range(-6i32..=6) as f64
        } else {
            match relation {
                Relation::LessEq => activity + slack,
                Relation::GreaterEq => activity - slack,
                Relation::Equal => activity,
            }
        };
        lp.add_row(a, relation, rhs);
    }
    lp
}

fn oracle(lp: &LinearProgram) -> Outcome {
    let rows: Vec<(Vec<f64>, Rel, f64)> = lp
        .rows
        .iter()
        .map(|r| {
            let rel = match r.relation {
                Relation::LessEq => Rel::Le,
                Relation::Equal => Rel::Eq,
                Relation::GreaterEq => Rel::Ge,
            };
            (r.coefficients.clone(), rel, r.rhs)
        })
        .collect();
    minimize(&lp.objective, &rows, &lp.bounds)
}

#[test]
fn random_programs_match_tableau_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut optimal, mut infeasible) = (0, 0);
    for _ in 0..500 {
        let lp = random_lp(&mut rng, 10, 8);
        let sol = solve_lp(&lp, default_iteration_limit(&lp)).unwrap();
        match oracle(&lp) {
            Outcome::Optimal { objective, .. } => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal);
                assert!((sol.objective_value - objective).abs() < 1e-6);
                assert!(lp.max_violation(&sol.values) <= 1e-7);
            }
            Outcome::Infeasible => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible);
            }
            Outcome::Unbounded => unreachable!("bounded variables"),
        }
    }
    assert!(optimal > 100 && infeasible > 10, "{optimal} {infeasible}");
}

#[test]
fn weak_duality_against_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let mut lp = random_lp(&mut rng, 8, 0);
        // Rows built around a known interior point stay feasible.
        let point: Vec<f64> = lp
            .bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(0.0..=1.0) * (hi - lo) + lo)
            .collect();
        for _ in 0..6 {
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let act: f64 = a.iter().zip(&point).map(|(x, y)| x * y).sum();
            if rng.random_bool(0.5) {
                lp.add_row(a, Relation::LessEq, act + rng.random_range(0.0..1.0));
            } else {
                lp.add_row(a, Relation::GreaterEq, act - rng.random_range(0.0..1.0));
            }
        }
        let sol = solve_lp(&lp, default_iteration_limit(&lp)).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective_value <= lp.objective_value(&point) + 1e-7);
    }
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let lp = random_lp(&mut rng, 10, 8);
        let a = solve_lp(&lp, 10_000).unwrap();
        let b = solve_lp(&lp, 10_000).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn fixings_equal_collapsed_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let lp = random_lp(&mut rng, 10, 8);
        let mut collapsed = lp.clone();
        let mut fixings = Vec::new();
        for j in 0..10 {
            if rng.random_bool(0.2) {
                let (lo, hi) = lp.bounds[j];
                let v = lo + (hi - lo) * rng.random_range(0..=2) as f64 / 2.0;
                fixings.push((j, v));
                collapsed.bounds[j] = (v, v);
            }
        }
        let a = solve_lp_with_fixings(&lp, &fixings, 10_000).unwrap();
        let b = solve_lp(&collapsed, 10_000).unwrap();
        assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            assert!((a.objective_value - b.objective_value).abs() < 1e-9);
        }
    }
}
