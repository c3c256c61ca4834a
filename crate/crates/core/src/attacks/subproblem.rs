use crate::error::{check_dim, Result};
use crate::geometry::adversarial_constraints;
use crate::linalg::norm2;
use crate::network::Signature;
use crate::qpsolve::solve_min_norm;
use crate::{BoxConstraint, LocalAffine, Network, Polytope, QpProblem};

/// Smallest perturbation found on one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSolution {
    pub delta: Vec<f64>,
    pub norm: f64,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutcome {
    pub signature: Signature,
    /// `None` when no target class is reachable inside the region.
    pub best: Option<RegionSolution>,
    pub qp_calls: usize,
}

/// Minimum-norm `δ` moving `x` into the decision region of some target
/// class, restricted to the linear region containing `y` (and the box).
pub fn region_subproblem(
    net: &Network,
    x: &[f64],
    y: &[f64],
    current: usize,
    targets: &[usize],
    bounds: Option<&BoxConstraint>,
) -> Result<RegionOutcome> {
    check_dim("sample point", net.input_dim(), y.len())?;
    let local = net.affine_coefficients(y)?;
    let domain = match bounds {
        Some(b) => b.to_polytope(),
        None => Polytope::whole_space(net.input_dim()),
    };
    solve_on_region(&local, x, current, targets, &domain)
}

pub(crate) fn solve_on_region(
    local: &LocalAffine,
    x: &[f64],
    current: usize,
    targets: &[usize],
    domain: &Polytope,
) -> Result<RegionOutcome> {
    let region = local.region();
    let mut best: Option<RegionSolution> = None;
    let mut qp_calls = 0;
    for &target in targets {
        qp_calls += 1;
        if let Some(delta) = solve_target(local, &region, x, current, target, domain, 0.0)? {
            let norm = norm2(&delta);
            if best.as_ref().is_none_or(|b| norm < b.norm) {
                best = Some(RegionSolution {
                    delta,
                    norm,
                    target,
                });
            }
        }
    }
    Ok(RegionOutcome {
        signature: local.signature.clone(),
        best,
        qp_calls,
    })
}

/// Minimum-norm `δ` for one target with `x + δ` at distance at least
/// `margin` from every face of the feasible set.
pub(crate) fn solve_target(
    local: &LocalAffine,
    region: &Polytope,
    x: &[f64],
    current: usize,
    target: usize,
    domain: &Polytope,
    margin: f64,
) -> Result<Option<Vec<f64>>> {
    let mut rows = adversarial_constraints(local.output(), current, target, region, domain, x)?;
    if margin > 0.0 {
        let b: Vec<f64> = rows
            .b()
            .iter()
            .zip(rows.a().row_iter())
            .map(|(&bi, ai)| bi - margin * norm2(ai))
            .collect();
        rows = Polytope::new(rows.a().clone(), b)?;
    }
    let sol = solve_min_norm(&QpProblem::new(rows)?)?;
    Ok(sol.is_optimal().then_some(sol.delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_net() -> Network {
        Network::from_weights(vec![(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 0.0])]).unwrap()
    }

    #[test]
    fn affine_projection() {
        let net = affine_net();
        let x = [1.0, 0.0];
        let out = region_subproblem(&net, &x, &x, 0, &[1], None).unwrap();
        let best = out.best.unwrap();
        assert!((best.delta[0] + 1.0).abs() < 1e-12 && best.delta[1].abs() < 1e-12);
        assert!((best.norm - 1.0).abs() < 1e-12);
        assert_eq!(out.qp_calls, 1);
    }

    #[test]
    fn closed_form_distance() {
        // |f0 - f1| / ‖V0 - V1‖ = 2 / 2
        let net = Network::from_weights(vec![(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![0.0, 0.0],
        )])
        .unwrap();
        let out = region_subproblem(&net, &[1.0, 0.0], &[1.0, 0.0], 0, &[1], None).unwrap();
        let best = out.best.unwrap();
        assert!((best.norm - 1.0).abs() < 1e-12);
        assert!((best.delta[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_feasible_target() {
        // hidden unit active only for z > 0; class 1 wins only when z < -1
        let net = Network::from_weights(vec![
            (vec![vec![1.0]], vec![0.0]),
            (vec![vec![1.0], vec![0.0]], vec![0.0, 0.0]),
        ])
        .unwrap();
        // at y = 2 the region is z >= 0, where f0 = z >= 0 = f1 only ties at 0
        // and with box [0.5, 3] class 1 is never reached
        let bounds = BoxConstraint::uniform(1, 0.5, 3.0).unwrap();
        let out = region_subproblem(&net, &[2.0], &[2.0], 0, &[1], Some(&bounds)).unwrap();
        assert!(out.best.is_none());
        assert_eq!(out.qp_calls, 1);
    }
}
