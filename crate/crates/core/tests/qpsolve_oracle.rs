mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relu_regions::qpsolve::{check_farkas, check_kkt, feasible_point, solve_min_norm};
use relu_regions::{KktTolerances, Polytope, QpProblem, QpStatus};

fn problem(rows: &[Vec<f64>], b: &[f64], d: usize) -> QpProblem {
    QpProblem::new(Polytope::from_rows(rows, b.to_vec(), d).unwrap()).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn matches_enumeration_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = KktTolerances::default();
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..1000 {
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = problem(&rows, &b, d);
        let sol = solve_min_norm(&p).unwrap();
        match support::enumerate_min_norm(&rows, &b, d) {
            Some(reference) => {
                feasible += 1;
                assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
                let gap = (norm(&sol.delta) - norm(&reference)).abs();
                assert!(gap <= 1e-7, "case {case}: gap {gap}");
                let report = check_kkt(&p, &sol.delta, &sol.multipliers);
                assert!(report.passes(&tol), "case {case}: {report:?}");
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, QpStatus::Infeasible, "case {case}");
                let y = sol.certificate.as_ref().unwrap();
                assert!(
                    check_farkas(&p, y).certifies_infeasibility(1e-7),
                    "case {case}"
                );
            }
        }
    }
    assert!(
        feasible > 100 && infeasible > 100,
        "{feasible} / {infeasible}"
    );
}

#[test]
fn feasible_point_status_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..500 {
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = problem(&rows, &b, d);
        let point = feasible_point(&p).unwrap();
        let reference = support::enumerate_min_norm(&rows, &b, d);
        assert_eq!(point.is_some(), reference.is_some(), "case {case}");
        if let Some(z) = point {
            assert!(p.constraints.contains(&z, 1e-8).unwrap());
        }
    }
}

#[test]
fn unit_box_feasible_point_inside() {
    let b = relu_regions::BoxConstraint::uniform(3, -1.0, 1.0)
        .unwrap()
        .to_polytope();
    let z = feasible_point(&QpProblem::new(b.clone()).unwrap())
        .unwrap()
        .unwrap();
    assert!(b.contains(&z, 0.0).unwrap());
    let empty = problem(&[], &[], 2);
    assert_eq!(feasible_point(&empty).unwrap(), Some(vec![0.0, 0.0]));
}

#[test]
fn repeated_solves_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = problem(&rows, &b, d);
        let a = solve_min_norm(&p).unwrap();
        let c = solve_min_norm(&p).unwrap();
        assert_eq!(a.status, c.status);
        assert_eq!(
            a.delta.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            c.delta.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn row_scaling_leaves_minimizer_unchanged(seed in any::<u64>(), factors in prop::collection::vec(0.01f64..100.0, 10)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, b, d) = support::random_qp(&mut rng);
        let base = solve_min_norm(&problem(&rows, &b, d)).unwrap();
        let rows2: Vec<Vec<f64>> = rows.iter().zip(&factors).map(|(r, f)| r.iter().map(|v| v * f).collect()).collect();
        let b2: Vec<f64> = b.iter().zip(&factors).map(|(v, f)| v * f).collect();
        let scaled = solve_min_norm(&problem(&rows2, &b2, d)).unwrap();
        prop_assert_eq!(base.status, scaled.status);
        for (x, y) in base.delta.iter().zip(&scaled.delta) {
            prop_assert!((x - y).abs() <= 1e-8, "{} vs {}", x, y);
        }
    }

    #[test]
    fn optimal_solutions_pass_kkt(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = problem(&rows, &b, d);
        let sol = solve_min_norm(&p).unwrap();
        if sol.status == QpStatus::Optimal {
            let report = check_kkt(&p, &sol.delta, &sol.multipliers);
            prop_assert!(report.passes(&KktTolerances::default()), "{:?}", report);
        } else {
            let y = sol.certificate.unwrap();
            prop_assert!(check_farkas(&p, &y).certifies_infeasibility(1e-7));
        }
    }

    #[test]
    fn containment_monotone_in_tolerance(seed in any::<u64>(), t1 in 0.0f64..0.1, extra in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = Polytope::from_rows(&rows, b, d).unwrap();
        let z: Vec<f64> = (0..d).map(|i| ((seed >> i) & 7) as f64 / 4.0 - 1.0).collect();
        if p.contains(&z, t1).unwrap() {
            prop_assert!(p.contains(&z, t1 + extra).unwrap());
        }
    }
}
