//! Exact minimum-norm adversarial perturbations by enumerating every
//! activation pattern of a small network.

use rayon::prelude::*;

use crate::attacks::solve_on_region;
use crate::error::{check_dim, Error, Result};
use crate::network::Signature;
use crate::{BoxConstraint, Network, Polytope};

/// Hard limit on the number of hidden units the oracle accepts.
pub const MAX_HIDDEN_UNITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub delta: Vec<f64>,
    pub norm: f64,
    /// Pattern whose closed region contains `x + delta`.
    pub optimal_signature: Signature,
    pub target: usize,
    pub patterns_enumerated: u64,
    /// Patterns on which at least one target class was reachable.
    pub feasible_patterns: u64,
}

/// Global minimum of `‖δ‖₂` over all `δ` that move `x` into another class's
/// decision region (and keep `x + δ` in `bounds`).
///
/// Every pattern in `{0,1}^N` is turned into its closed region and the
/// per-region problem is solved for every other class. Returns `Ok(None)`
/// when no class other than the current one is reachable. Ties are broken
/// towards the lexicographically smallest signature.
pub fn exact_min_adversarial(
    net: &Network,
    x: &[f64],
    bounds: Option<&BoxConstraint>,
    budget: u64,
) -> Result<Option<OracleResult>> {
    check_dim("input", net.input_dim(), x.len())?;
    let units = net.hidden_units();
    let patterns: u128 = 1u128 << units.min(127);
    let cap = (budget as u128).min(1u128 << MAX_HIDDEN_UNITS);
    if units > MAX_HIDDEN_UNITS || patterns > cap {
        return Err(Error::BudgetExceeded {
            hidden_units: units,
            patterns,
            cap,
        });
    }
    if let Some(b) = bounds {
        check_dim("box", net.input_dim(), b.dim())?;
    }
    let logits = net.logits(x)?;
    let current = net.classify(x)?;
    if logits
        .iter()
        .enumerate()
        .any(|(l, &v)| l != current && v == logits[current])
    {
        return Err(Error::Precondition("the top logit of x is tied".into()));
    }
    let targets: Vec<usize> = (0..net.num_classes()).filter(|&l| l != current).collect();
    let domain = match bounds {
        Some(b) => b.to_polytope(),
        None => Polytope::whole_space(net.input_dim()),
    };

    let count = patterns as u64;
    let solved: Vec<(u64, Option<(f64, Vec<f64>, usize)>)> = (0..count)
        .into_par_iter()
        .map(|index| {
            let signature = Signature::from_index(index, units);
            let outcome = net
                .affine_from_signature(&signature)
                .and_then(|local| solve_on_region(&local, x, current, &targets, &domain));
            match outcome {
                Ok(o) => (index, o.best.map(|b| (b.norm, b.delta, b.target))),
                Err(e) => {
                    log::warn!("pattern {signature:?} skipped: {e}");
                    (index, None)
                }
            }
        })
        .collect();

    let feasible_patterns = solved.iter().filter(|(_, b)| b.is_some()).count() as u64;
    let best = solved
        .into_iter()
        .filter_map(|(index, b)| b.map(|b| (index, b)))
        .min_by(|(ia, a), (ib, b)| a.0.total_cmp(&b.0).then(ia.cmp(ib)));
    Ok(best.map(|(index, (norm, delta, target))| OracleResult {
        delta,
        norm,
        optimal_signature: Signature::from_index(index, units),
        target,
        patterns_enumerated: count,
        feasible_patterns,
    }))
}
