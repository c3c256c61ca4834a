use crate::error::{Error, Result};
use crate::geometry::adversarial_constraints;
use crate::linalg::{add, norm2, scale};
use crate::qpsolve::solve_min_norm;
use crate::{AffineMap, BoxConstraint, Network, Polytope, QpProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct DeepFoolConfig {
    pub max_iters: usize,
    pub overshoot: f64,
    /// Iterates stay inside this box.
    pub bounds: Option<BoxConstraint>,
}

impl Default for DeepFoolConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            overshoot: 0.02,
            bounds: None,
        }
    }
}

/// Multi-class DeepFool: repeatedly linearize the network at the current
/// iterate and step to the nearest linearized decision boundary, with the
/// accumulated step scaled by `1 + overshoot`. Returns `Ok(None)` if the
/// class did not change within `max_iters` steps.
///
/// With a box, each step is the shortest move inside the box that changes
/// the linearized logit gap by `1 + overshoot` times what is needed, since
/// scaling the accumulated step would be undone by clipping on box faces.
pub fn deepfool(net: &Network, x: &[f64], cfg: &DeepFoolConfig) -> Result<Option<Vec<f64>>> {
    if cfg.max_iters == 0 || !(cfg.overshoot >= 0.0) {
        return Err(Error::Config(
            "deepfool needs max_iters >= 1 and overshoot >= 0".into(),
        ));
    }
    let current = net.classify(x)?;
    let d = x.len();
    let mut total = vec![0.0; d];
    let mut point = x.to_vec();
    let domain = cfg.bounds.as_ref().map(BoxConstraint::to_polytope);
    for _ in 0..cfg.max_iters {
        let local = net.affine_coefficients(&point)?;
        let out = local.output();
        let logits = out.apply(&point);
        let step = match &domain {
            Some(domain) => boxed_step(out, current, &point, domain, cfg.overshoot)?,
            None => free_step(out, current, &logits),
        };
        let Some(r) = step else {
            return Ok(None);
        };
        for (t, ri) in total.iter_mut().zip(&r) {
            *t += ri;
        }
        match &cfg.bounds {
            Some(b) => {
                point = add(x, &total);
                b.clamp(&mut point);
            }
            None => {
                point = x
                    .iter()
                    .zip(&total)
                    .map(|(xi, ti)| xi + (1.0 + cfg.overshoot) * ti)
                    .collect();
            }
        }
        if net.classify(&point)? != current {
            return Ok(Some(point.iter().zip(x).map(|(p, xi)| p - xi).collect()));
        }
    }
    Ok(None)
}

/// Projection onto the nearest linearized boundary.
fn free_step(out: &AffineMap, current: usize, logits: &[f64]) -> Option<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for l in (0..logits.len()).filter(|&l| l != current) {
        let w: Vec<f64> = out
            .v
            .row(l)
            .iter()
            .zip(out.v.row(current))
            .map(|(a, b)| a - b)
            .collect();
        let wn = norm2(&w);
        if wn == 0.0 {
            continue;
        }
        let gap = (logits[l] - logits[current]).abs();
        if best.as_ref().is_none_or(|(dist, _)| gap / wn < *dist) {
            best = Some((gap / wn, scale(gap / (wn * wn), &w)));
        }
    }
    best.map(|(_, r)| r)
}

/// Nearest point of any linearized boundary that stays inside the box.
fn boxed_step(
    out: &AffineMap,
    current: usize,
    point: &[f64],
    domain: &Polytope,
    overshoot: f64,
) -> Result<Option<Vec<f64>>> {
    let whole = Polytope::whole_space(point.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for l in (0..out.output_dim()).filter(|&l| l != current) {
        let rows = adversarial_constraints(out, current, l, &whole, domain, point)?;
        let mut b = rows.b().to_vec();
        if b[0] < 0.0 {
            b[0] *= 1.0 + overshoot;
        }
        let rows = Polytope::new(rows.a().clone(), b)?;
        let sol = match solve_min_norm(&QpProblem::new(rows)?) {
            Ok(sol) => sol,
            Err(e) => {
                log::debug!("deepfool step towards class {l} skipped: {e}");
                continue;
            }
        };
        if sol.is_optimal() {
            let n = norm2(&sol.delta);
            if best.as_ref().is_none_or(|(bn, _)| n < *bn) {
                best = Some((n, sol.delta));
            }
        }
    }
    Ok(best.map(|(_, r)| r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn affine_one_step() {
        let net = Network::from_weights(vec![(
            vec![vec![1.0, 0.5], vec![-1.0, 0.0]],
            vec![0.0, 0.2],
        )])
        .unwrap();
        let x = [1.0, 1.0];
        let delta = deepfool(&net, &x, &DeepFoolConfig::default())
            .unwrap()
            .unwrap();
        // f0 - f1 = 2 z1 + 0.5 z2 - 0.2, distance 2.3 / ‖(2, 0.5)‖
        let w = [2.0f64, 0.5];
        let exact = 2.3 / dot(&w, &w).sqrt();
        assert!((norm2(&delta) - 1.02 * exact).abs() < 1e-12);
        assert_ne!(
            net.classify(&[x[0] + delta[0], x[1] + delta[1]]).unwrap(),
            0
        );
    }

    #[test]
    fn degenerate_rows_fail() {
        let net =
            Network::from_weights(vec![(vec![vec![1.0], vec![1.0]], vec![1.0, 0.0])]).unwrap();
        assert_eq!(
            deepfool(&net, &[0.3], &DeepFoolConfig::default()).unwrap(),
            None
        );
    }
}
