use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::sampling::sample_ball;
use super::subproblem::solve_target;
use super::{is_adversarial, AttackConfig, AttackResult, Phase, TraceEntry};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{add, norm2};
use crate::network::Signature;
use crate::{LocalAffine, Network, Polytope};

struct Search<'a> {
    net: &'a Network,
    x: &'a [f64],
    cfg: &'a AttackConfig,
    current: usize,
    targets: Vec<usize>,
    domain: Polytope,
    seen: HashSet<Signature>,
    visited: Vec<Signature>,
    delta: Vec<f64>,
    u: f64,
    working: Vec<Vec<f64>>,
    working_norms: Vec<f64>,
    trace: Vec<TraceEntry>,
    qp_calls: usize,
    interior_resolves: usize,
    solver_failures: usize,
    rejected: usize,
}

#[derive(Default)]
struct Evaluation {
    qp_calls: usize,
    interior_resolves: usize,
    rejected: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    /// Region of a sample point, or `None` if it was visited before.
    fn claim(&mut self, y: &[f64]) -> Option<LocalAffine> {
        let local = match self.net.affine_coefficients(y) {
            Ok(local) => local,
            Err(e) => {
                log::warn!("skipping sample: {e}");
                return None;
            }
        };
        if !self.seen.insert(local.signature.clone()) {
            return None;
        }
        self.visited.push(local.signature.clone());
        Some(local)
    }

    /// Best verified candidate on one region. Minimizers that fail the
    /// pushed check are re-solved a little inside the feasible set.
    fn evaluate(&self, local: &LocalAffine) -> Result<Evaluation> {
        let region = local.region();
        let mut eval = Evaluation::default();
        let mut raw = Vec::new();
        for &target in &self.targets {
            eval.qp_calls += 1;
            let solved = solve_target(
                local,
                &region,
                self.x,
                self.current,
                target,
                &self.domain,
                0.0,
            )?;
            if let Some(delta) = solved {
                raw.push((norm2(&delta), target, delta));
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (norm, target, delta) in raw {
            if eval.best.as_ref().is_some_and(|(_, n)| norm >= *n) {
                break;
            }
            if self.valid(&delta) {
                eval.best = Some((delta, norm));
                continue;
            }
            eval.interior_resolves += 1;
            let margin = 2.0 * self.cfg.boundary_tol * norm + 1e-12;
            let inner = solve_target(
                local,
                &region,
                self.x,
                self.current,
                target,
                &self.domain,
                margin,
            )?;
            match inner.filter(|d| self.valid(d)) {
                Some(d) => {
                    let n = norm2(&d);
                    if eval.best.as_ref().is_none_or(|(_, bn)| n < *bn) {
                        eval.best = Some((d, n));
                    }
                }
                None => eval.rejected += 1,
            }
        }
        Ok(eval)
    }

    fn valid(&self, delta: &[f64]) -> bool {
        is_adversarial(self.net, self.x, self.current, delta, self.cfg.boundary_tol)
    }

    fn absorb(&mut self, eval: Result<Evaluation>, outer: usize, phase: Phase) {
        let Some((delta, n)) = self.tally(eval) else {
            return;
        };
        if n < self.u {
            self.delta = delta.clone();
            self.u = n;
            self.trace.push(TraceEntry {
                norm: n,
                outer_iteration: outer,
                phase,
            });
        }
        let m = worst(&self.working_norms);
        if n < self.cfg.alpha * self.u && n < self.working_norms[m] {
            self.working[m] = delta;
            self.working_norms[m] = n;
        }
    }

    fn tally(&mut self, eval: Result<Evaluation>) -> Option<(Vec<f64>, f64)> {
        match eval {
            Ok(e) => {
                self.qp_calls += e.qp_calls;
                self.interior_resolves += e.interior_resolves;
                self.rejected += e.rejected;
                e.best
            }
            Err(e) => {
                log::debug!("region solve failed: {e}");
                self.solver_failures += 1;
                None
            }
        }
    }

    fn sample_around(&self, rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
        let eps = sample_ball(rng, self.x.len(), radius);
        let mut y = add(&add(self.x, center), &eps);
        if let Some(b) = &self.cfg.bounds {
            b.clamp(&mut y);
        }
        y
    }
}

fn worst(norms: &[f64]) -> usize {
    let mut m = 0;
    for (i, &v) in norms.iter().enumerate() {
        if v > norms[m] {
            m = i;
        }
    }
    m
}

/// Randomized linear-region search for a minimum-norm adversarial
/// perturbation of `x`.
///
/// `warm` is an adversarial perturbation to start from (typically DeepFool
/// followed by boundary refinement). The search solves the per-region
/// problem on the region of `x`, then explores regions around a working set
/// of good perturbations with shrinking radii, and finally searches locally
/// around the incumbent.
pub fn rlr_qp(
    net: &Network,
    x: &[f64],
    warm: Option<&[f64]>,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_dim("input", net.input_dim(), x.len())?;
    if let Some(w) = warm {
        check_dim("warm start", net.input_dim(), w.len())?;
    }
    if let Some(b) = &cfg.bounds {
        check_dim("box", net.input_dim(), b.dim())?;
        if !b.contains(x) {
            return Err(Error::Precondition("input lies outside the box".into()));
        }
    }
    let current = net.classify(x)?;

    let warm = warm.filter(|w| {
        let ok = is_adversarial(net, x, current, w, cfg.boundary_tol);
        if !ok {
            log::warn!("warm start is not adversarial; ignoring it");
        }
        ok
    });
    let warm_class = match warm {
        Some(w) => Some(net.classify(&add(x, w))?),
        None => None,
    };
    let targets = cfg
        .targets
        .resolve(net.num_classes(), current, warm_class)?;
    let domain = match &cfg.bounds {
        Some(b) => b.to_polytope(),
        None => Polytope::whole_space(net.input_dim()),
    };

    let mut s = Search {
        net,
        x,
        cfg,
        current,
        targets,
        domain,
        seen: HashSet::new(),
        visited: Vec::new(),
        delta: vec![0.0; x.len()],
        u: f64::INFINITY,
        working: Vec::new(),
        working_norms: Vec::new(),
        trace: Vec::new(),
        qp_calls: 0,
        interior_resolves: 0,
        solver_failures: 0,
        rejected: 0,
    };

    let mut warm_start_norm = None;
    if let Some(w) = warm {
        s.delta = w.to_vec();
        s.u = norm2(w);
        warm_start_norm = Some(s.u);
    }

    let mut first_region_norm = None;
    if let Some(local) = s.claim(x) {
        let eval = s.evaluate(&local);
        if let Some((delta, n)) = s.tally(eval) {
            first_region_norm = Some(n);
            if n < s.u {
                s.delta = delta;
                s.u = n;
            }
        }
    }

    if s.u.is_finite() {
        s.trace.push(TraceEntry {
            norm: s.u,
            outer_iteration: 0,
            phase: Phase::Init,
        });
    }
    // Without a starting point the search explores around x itself, with a
    // radius set by the input domain that grows until a candidate turns up.
    let blind_radius = match &cfg.bounds {
        Some(b) => norm2(&crate::linalg::sub(b.upper(), b.lower())),
        None => norm2(x).max(1.0),
    };
    let radius_of = |u: f64, a1: usize| {
        if u.is_finite() {
            u / a1 as f64
        } else {
            blind_radius * a1 as f64
        }
    };
    s.working = vec![s.delta.clone(); cfg.n1];
    s.working_norms = vec![s.u; cfg.n1];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for a1 in 1..=cfg.n4 {
        for _ in 0..cfg.n3 {
            let radius = radius_of(s.u, a1);
            let mut batch = Vec::with_capacity(cfg.n1 * cfg.n2);
            for i in 0..cfg.n1 {
                for _ in 0..cfg.n2 {
                    batch.push(s.sample_around(&mut rng, &s.working[i], radius));
                }
            }
            let regions: Vec<LocalAffine> = batch.iter().filter_map(|y| s.claim(y)).collect();
            let evals: Vec<Result<Evaluation>> =
                regions.par_iter().map(|local| s.evaluate(local)).collect();
            for eval in evals {
                s.absorb(eval, a1, Phase::Exploration);
            }
        }
        for _ in 0..cfg.n2 {
            let y = s.sample_around(&mut rng, &s.delta, radius_of(s.u, a1));
            if let Some(local) = s.claim(&y) {
                let eval = s.evaluate(&local);
                s.absorb(eval, a1, Phase::LocalSearch);
            }
        }
    }

    let success = s.u.is_finite();
    let adversarial_class = if success {
        let z: Vec<f64> = x
            .iter()
            .zip(&s.delta)
            .map(|(&xi, &di)| xi + (1.0 + cfg.boundary_tol) * di)
            .collect();
        Some(net.classify(&z)?)
    } else {
        None
    };
    Ok(AttackResult {
        delta: s.delta,
        norm: s.u,
        success,
        original_class: current,
        adversarial_class,
        regions_checked: s.visited.len(),
        qp_calls: s.qp_calls,
        interior_resolves: s.interior_resolves,
        warm_start_norm,
        first_region_norm,
        trace: s.trace,
        visited: s.visited,
        solver_failures: s.solver_failures,
        rejected_candidates: s.rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::Targets;

    fn small_cfg() -> AttackConfig {
        AttackConfig {
            n1: 3,
            n2: 3,
            n3: 2,
            n4: 2,
            ..AttackConfig::default()
        }
    }

    #[test]
    fn affine_classifier_is_solved_at_start() {
        let net = Network::from_weights(vec![(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
            vec![1.0, 0.0, 0.0],
        )])
        .unwrap();
        let x = [1.0, 0.5];
        let r = rlr_qp(&net, &x, None, &AttackConfig::default()).unwrap();
        // f0 - f1 = z1 - z2 + 1 = 1.5 over ‖(1,-1)‖; f0 - f2 = 2 z1 + z2 + 1 = 3.5 over √5
        let exact = (1.5 / 2f64.sqrt()).min(3.5 / 5f64.sqrt());
        assert!((r.norm - exact).abs() < 1e-10);
        assert_eq!(r.regions_checked, 1);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.first_region_norm, Some(r.norm));
    }

    #[test]
    fn failure_without_start() {
        // class 1 never wins
        let net =
            Network::from_weights(vec![(vec![vec![0.0], vec![0.0]], vec![1.0, 0.0])]).unwrap();
        let r = rlr_qp(&net, &[0.3], None, &small_cfg()).unwrap();
        assert!(!r.success);
        assert!(r.norm.is_infinite());
        assert_eq!(r.adversarial_class, None);
    }

    #[test]
    fn reproducible_and_within_budget() {
        let net = Network::gaussian(&[3, 6, 5, 3], 0.3, 11);
        let x = [0.4, -0.2, 0.7];
        let cfg = AttackConfig {
            seed: 5,
            ..small_cfg()
        };
        let a = rlr_qp(&net, &x, None, &cfg).unwrap();
        let b = rlr_qp(&net, &x, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.regions_checked <= cfg.region_budget());
        assert!(a.qp_calls <= cfg.region_budget() * (net.num_classes() - 1));
        let unique: HashSet<_> = a.visited.iter().collect();
        assert_eq!(unique.len(), a.visited.len());
        assert!(a.trace.windows(2).all(|w| w[1].norm < w[0].norm));
    }

    #[test]
    fn warm_start_only_improves() {
        let net = Network::gaussian(&[2, 6, 3], 0.3, 2);
        let x = [0.5, 0.5];
        let c = net.classify(&x).unwrap();
        let ws = crate::attacks::warm_start(&net, &x, &Default::default(), 40).unwrap();
        let first = rlr_qp(&net, &x, ws.delta.as_deref(), &small_cfg()).unwrap();
        assert!(first.success);
        let cfg = AttackConfig {
            targets: Targets::WarmStartClass,
            seed: 9,
            ..small_cfg()
        };
        let again = rlr_qp(&net, &x, Some(&first.delta), &cfg).unwrap();
        assert_eq!(again.warm_start_norm, Some(first.norm));
        assert!(again.norm <= first.norm);
        assert!(is_adversarial(&net, &x, c, &again.delta, cfg.boundary_tol));
    }

    #[test]
    fn input_outside_box_is_rejected() {
        let net = Network::gaussian(&[2, 4, 3], 0.1, 0);
        let cfg = AttackConfig {
            bounds: Some(crate::BoxConstraint::unit(2)),
            ..small_cfg()
        };
        assert!(matches!(
            rlr_qp(&net, &[1.5, 0.5], None, &cfg),
            Err(Error::Precondition(_))
        ));
    }
}
