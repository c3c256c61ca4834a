//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relu_regions::attacks::{is_adversarial, rlr_qp, sample_ball, warm_start, AttackConfig};
use relu_regions::qpsolve::{check_farkas, check_kkt, solve_min_norm};
use relu_regions::{BoxConstraint, KktTolerances, Network, Polytope, QpProblem, QpStatus};
use relu_regions_cli::commands::{self, Method, Options};
use relu_regions_cli::dataset::{Dataset, Point};
use relu_regions_cli::report::{parse_num, Report};

const MASTER_SEED: u64 = 0;
const BIAS_STD: f64 = 0.1;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct SuiteNet {
    net: Network,
    data: Dataset,
}

/// Five random nets with ten inputs each, every input having a reachable
/// other class inside the unit box. A net is redrawn if 200 consecutive
/// draws yield no such input.
fn oracle_suite() -> Vec<SuiteNet> {
    let layouts: [&[usize]; 3] = [&[8], &[8, 4], &[12]];
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    (0..5)
        .map(|n| {
            let d = [4, 6][n % 2];
            let mut sizes = vec![d];
            sizes.extend_from_slice(layouts[n % 3]);
            sizes.push(3);
            let bounds = BoxConstraint::unit(d);
            let mut net = Network::gaussian(&sizes, BIAS_STD, rng.random());
            let mut points = Vec::new();
            let mut tries = 0;
            while points.len() < 10 {
                tries += 1;
                if tries > 200 && points.is_empty() {
                    net = Network::gaussian(&sizes, BIAS_STD, rng.random());
                    tries = 0;
                }
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let reachable =
                    relu_regions::oracle::exact_min_adversarial(&net, &x, Some(&bounds), 1 << 20)
                        .map(|r| r.is_some())
                        .unwrap_or(false);
                if reachable {
                    let label = net.classify(&x).unwrap();
                    points.push(Point { x, label });
                }
            }
            SuiteNet {
                net,
                data: Dataset {
                    points,
                    dim: d,
                    range: Some((0.0, 1.0)),
                },
            }
        })
        .collect()
}

fn options(data: &Dataset, n4: usize) -> Options {
    Options::new(AttackConfig {
        n4,
        bounds: data.bounds(),
        seed: MASTER_SEED,
        ..AttackConfig::default()
    })
}

fn column(report: &Report, name: &str) -> Vec<Option<f64>> {
    report
        .values(name)
        .unwrap()
        .into_iter()
        .map(parse_num)
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn oracle_optimality(suite: &[SuiteNet]) -> Outcome {
    let (mut rl, mut df) = (Vec::new(), Vec::new());
    let (mut rl_fail, mut df_fail) = (0, 0);
    for s in suite {
        let methods = [Method::Oracle, Method::RlrQp, Method::DeepFool];
        let report = commands::compare_oracle(
            &s.net,
            &s.data,
            Path::new("suite"),
            &options(&s.data, 3),
            &methods,
            1 << 20,
        )
        .unwrap();
        for r in column(&report, "rlrqp_ratio") {
            r.map_or_else(|| rl_fail += 1, |r| rl.push(r));
        }
        for r in column(&report, "deepfool_ratio") {
            r.map_or_else(|| df_fail += 1, |r| df.push(r));
        }
    }
    let rl_mean = mean(&rl);
    let rl_max = rl.iter().copied().fold(0.0, f64::max);
    let df_mean = mean(&df);
    let worst: Vec<String> = rl
        .iter()
        .filter(|&&r| r > 1.001)
        .map(|r| format!("{r:.4}"))
        .collect();
    Outcome {
        name: "oracle optimality",
        pass: rl_fail == 0 && format!("{rl_mean:.4}") == "1.0000" && rl_max <= 1.001 && df_mean > 1.0,
        detail: format!(
            "rLR-QP mean {rl_mean:.4} max {rl_max:.4} over {} points ({rl_fail} failed, above 1.001: {worst:?}); DeepFool mean {df_mean:.4} over {} ({df_fail} failed)",
            rl.len(),
            df.len()
        ),
    }
}

/// Direct library runs with the same per-point seeds the commands use.
fn budget_and_validity(suite: &[SuiteNet]) -> (Outcome, Outcome) {
    let mut runs = 0;
    let mut max_regions = 0;
    let mut over_budget = 0;
    let mut increases = 0;
    let mut invalid = 0;
    for s in suite {
        let opts = options(&s.data, 3);
        for (id, p) in s.data.points.iter().enumerate() {
            let ws = warm_start(&s.net, &p.x, &opts.deepfool, opts.refine_iters).unwrap();
            let cfg = AttackConfig {
                seed: MASTER_SEED + id as u64,
                ..opts.attack.clone()
            };
            let r = rlr_qp(&s.net, &p.x, ws.delta.as_deref(), &cfg).unwrap();
            runs += 1;
            max_regions = max_regions.max(r.regions_checked);
            if r.regions_checked > 1531 {
                over_budget += 1;
            }
            if let Some(w) = r.warm_start_norm {
                if r.norm > w {
                    increases += 1;
                }
            }
            let current = s.net.classify(&p.x).unwrap();
            if r.success && !is_adversarial(&s.net, &p.x, current, &r.delta, 1e-6) {
                invalid += 1;
            }
        }
    }
    (
        Outcome {
            name: "budget bound",
            pass: over_budget == 0,
            detail: format!("{runs} runs, max regions_checked {max_regions} (bound 1531), {over_budget} over"),
        },
        Outcome {
            name: "monotonicity and validity",
            pass: increases == 0 && invalid == 0,
            detail: format!("{runs} runs, {increases} norm increases over the warm start, {invalid} invalid perturbations"),
        },
    )
}

fn exact_affine() -> Outcome {
    let layouts: [&[usize]; 4] = [&[8], &[6, 5], &[10, 6, 4], &[12]];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut mismatched_signatures = 0;
    let mut points = 0;
    for pair in 0..20 {
        let d = rng.random_range(2..=6);
        let mut sizes = vec![d];
        sizes.extend_from_slice(layouts[pair % layouts.len()]);
        sizes.push(rng.random_range(2..=5));
        let net = Network::gaussian(&sizes, 0.5, rng.random());
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let local = net.affine_coefficients(&x).unwrap();
        let region = local.region();
        let mut radius = 1.0;
        let mut accepted = 0;
        let mut rejected = 0;
        while accepted < 100 {
            let step = sample_ball(&mut rng, d, radius);
            let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            if region.row_values(&y).iter().any(|&v| v <= 0.0) {
                rejected += 1;
                if rejected % 20 == 0 {
                    radius *= 0.5;
                }
                continue;
            }
            accepted += 1;
            points += 1;
            if net.signature(&y).unwrap() != local.signature {
                mismatched_signatures += 1;
            }
            let f = net.logits(&y).unwrap();
            let g = local.output().apply(&y);
            let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in f.iter().zip(&g) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    Outcome {
        name: "exact-affine representation",
        pass: worst <= 1e-8 && mismatched_signatures == 0,
        detail: format!(
            "{points} interior points over 20 (net, x) pairs, max relative logit error {worst:.2e}, {mismatched_signatures} signature mismatches"
        ),
    }
}

fn qp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let tol = KktTolerances::default();
    let (mut feasible, mut infeasible) = (0, 0);
    let mut worst_gap = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..1000 {
        let (rows, b, d) = support::random_qp(&mut rng);
        let p = QpProblem::new(Polytope::from_rows(&rows, b.clone(), d).unwrap()).unwrap();
        let sol = match solve_min_norm(&p) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        match support::enumerate_min_norm(&rows, &b, d) {
            Some(reference) => {
                feasible += 1;
                if sol.status != QpStatus::Optimal {
                    failures.push(format!(
                        "case {case}: status {:?}, expected optimal",
                        sol.status
                    ));
                    continue;
                }
                let gap = (norm(&sol.delta) - norm(&reference)).abs();
                worst_gap = worst_gap.max(gap);
                if gap > 1e-7 {
                    failures.push(format!("case {case}: norm gap {gap:e}"));
                }
                if !check_kkt(&p, &sol.delta, &sol.multipliers).passes(&tol) {
                    failures.push(format!("case {case}: KKT check failed"));
                }
            }
            None => {
                infeasible += 1;
                if sol.status != QpStatus::Infeasible {
                    failures.push(format!(
                        "case {case}: status {:?}, expected infeasible",
                        sol.status
                    ));
                } else if let Some(y) = &sol.certificate {
                    if !check_farkas(&p, y).certifies_infeasibility(1e-7) {
                        failures.push(format!("case {case}: certificate rejected"));
                    }
                }
            }
        }
    }
    Outcome {
        name: "QP correctness",
        pass: failures.is_empty(),
        detail: format!(
            "1000 problems ({feasible} feasible, {infeasible} infeasible), max norm gap {worst_gap:.2e}, failures {failures:?}"
        ),
    }
}

fn sampler_law() -> Outcome {
    let (n, d) = (100_000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut radii: Vec<f64> = (0..n)
        .map(|_| {
            sample_ball(&mut rng, d, 1.0)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    radii.sort_by(f64::total_cmp);
    let max_norm = radii[n - 1];
    let ks = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            (r - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - r).abs())
        })
        .fold(0.0, f64::max);
    Outcome {
        name: "sampler law",
        pass: ks <= 0.01 && max_norm <= 1.0,
        detail: format!("{n} draws at d = {d}, KS statistic {ks:.5}, max norm {max_norm}"),
    }
}

fn iterated_attack(suite: &[SuiteNet]) -> Outcome {
    let rounds = 5;
    let mut norms: Vec<Vec<f64>> = vec![Vec::new(); rounds];
    let mut violations = 0;
    let mut failed = 0;
    let mut improved_points = 0;
    let mut at_optimum = 0;
    for s in suite {
        let bounds = s.data.bounds();
        let report = commands::iterate(
            &s.net,
            &s.data,
            Path::new("suite"),
            &options(&s.data, 1),
            rounds,
        )
        .unwrap();
        violations += report.summary_line("violations").unwrap()[0]
            .parse::<usize>()
            .unwrap();
        let cols: Vec<Vec<Option<f64>>> = (1..=rounds)
            .map(|r| column(&report, &format!("round_{r}_norm")))
            .collect();
        for p in 0..s.data.len() {
            if cols.iter().any(|c| c[p].is_none()) {
                failed += 1;
                continue;
            }
            if cols[rounds - 1][p].unwrap() < cols[0][p].unwrap() {
                improved_points += 1;
            }
            let exact = relu_regions::oracle::exact_min_adversarial(
                &s.net,
                &s.data.points[p].x,
                bounds.as_ref(),
                1 << 20,
            )
            .unwrap()
            .unwrap();
            if cols[0][p].unwrap() <= exact.norm * (1.0 + 1e-9) {
                at_optimum += 1;
            }
            for r in 0..rounds {
                norms[r].push(cols[r][p].unwrap());
            }
        }
    }
    let means: Vec<f64> = norms.iter().map(|n| mean(n)).collect();
    let progressive: Vec<String> = means
        .windows(2)
        .map(|w| format!("{:.2}%", 100.0 * (w[0] - w[1]) / w[0]))
        .collect();
    Outcome {
        name: "iterated attack",
        pass: means[rounds - 1] < means[0] && violations == 0 && failed == 0,
        detail: format!(
            "n4 = 1, round means {:?}, progressive improvement {progressive:?}, {improved_points} points improved, {at_optimum} of {} points already at the exact optimum after round 1, {violations} violations, {failed} failures",
            means.iter().map(|m| format!("{m:.6}")).collect::<Vec<_>>(),
            norms[0].len()
        ),
    }
}

fn determinism(suite: &[SuiteNet]) -> Outcome {
    let mut differing = 0;
    for s in suite {
        let run = |workers| {
            let mut opts = options(&s.data, 3);
            opts.workers = Some(workers);
            commands::attack(&s.net, &s.data, Path::new("suite"), &opts)
                .unwrap()
                .without_timing()
                .to_csv()
                .unwrap()
        };
        if run(1) != run(4) {
            differing += 1;
        }
    }
    Outcome {
        name: "determinism",
        pass: differing == 0,
        detail: format!(
            "{} nets, reports with 1 and 4 workers identical except {differing}",
            suite.len()
        ),
    }
}

fn main() {
    let started = Instant::now();
    let suite = oracle_suite();
    let mut outcomes = vec![oracle_optimality(&suite), exact_affine(), qp_correctness()];
    let (budget, validity) = budget_and_validity(&suite);
    outcomes.push(budget);
    outcomes.push(validity);
    outcomes.push(sampler_law());
    outcomes.push(iterated_attack(&suite));
    outcomes.push(determinism(&suite));
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        outcomes.len() - failed,
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
