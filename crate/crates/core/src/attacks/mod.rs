//! The linear-region attack stack: per-region subproblems, the randomized
//! region search, the DeepFool warm start and boundary refinement.

mod deepfool;
mod refine;
mod rlrqp;
mod sampling;
mod subproblem;

pub use deepfool::{deepfool, DeepFoolConfig};
pub use refine::{boundary_refine, fallback_start, warm_start, WarmSource, WarmStart};
pub use rlrqp::rlr_qp;
pub use sampling::sample_ball;
pub(crate) use subproblem::solve_on_region;
pub use subproblem::{region_subproblem, RegionOutcome, RegionSolution};

use crate::error::{Error, Result};
use crate::network::Signature;
use crate::{BoxConstraint, Network};

/// Which classes the per-region problems try to reach.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    /// Every class other than the current one.
    All,
    /// Only the class of `x + δ_WS`; falls back to all classes when no warm
    /// start is supplied.
    WarmStartClass,
    Explicit(Vec<usize>),
}

impl Targets {
    /// All classes for single-hidden-layer networks, the warm-start class for
    /// deeper ones.
    pub fn for_depth(depth: usize) -> Self {
        if depth <= 1 {
            Targets::All
        } else {
            Targets::WarmStartClass
        }
    }

    /// Concrete, sorted target list excluding `current`.
    pub fn resolve(
        &self,
        num_classes: usize,
        current: usize,
        warm_class: Option<usize>,
    ) -> Result<Vec<usize>> {
        let all = || {
            (0..num_classes)
                .filter(|&l| l != current)
                .collect::<Vec<_>>()
        };
        match self {
            Targets::All => Ok(all()),
            Targets::WarmStartClass => Ok(match warm_class {
                Some(l) if l != current => vec![l],
                _ => all(),
            }),
            Targets::Explicit(list) => {
                if let Some(&bad) = list.iter().find(|&&l| l >= num_classes) {
                    return Err(Error::Config(format!(
                        "target class {bad} out of range for {num_classes} classes"
                    )));
                }
                let mut out: Vec<usize> = list.iter().copied().filter(|&l| l != current).collect();
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Working-set size.
    pub n1: usize,
    /// Samples per working-set member and per local-search step.
    pub n2: usize,
    /// Exploration rounds per outer iteration.
    pub n3: usize,
    /// Outer iterations; sampling radius is `u / a` in iteration `a`.
    pub n4: usize,
    /// Working-set members may be up to `alpha` times worse than the incumbent.
    pub alpha: f64,
    pub targets: Targets,
    /// Input domain `x + δ` must stay in; `None` for unconstrained inputs.
    pub bounds: Option<BoxConstraint>,
    pub seed: u64,
    /// Returned perturbations are verified at `(1 + boundary_tol) · δ`.
    pub boundary_tol: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            n1: 10,
            n2: 10,
            n3: 5,
            n4: 3,
            alpha: 1.5,
            targets: Targets::All,
            bounds: None,
            seed: 0,
            boundary_tol: 1e-6,
        }
    }
}

impl AttackConfig {
    /// Upper bound on visited regions: `1 + (n1·n3 + 1)·n2·n4`.
    pub fn region_budget(&self) -> usize {
        1 + (self.n1 * self.n3 + 1) * self.n2 * self.n4
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n1", self.n1),
            ("n2", self.n2),
            ("n3", self.n3),
            ("n4", self.n4),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be > 1, got {}",
                self.alpha
            )));
        }
        if !(self.boundary_tol >= 0.0) || !self.boundary_tol.is_finite() {
            return Err(Error::Config("boundary_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Exploration,
    LocalSearch,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Exploration => "exploration",
            Phase::LocalSearch => "local-search",
        }
    }
}

/// One incumbent improvement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub norm: f64,
    /// 0 during initialization, otherwise the outer iteration `1..=n4`.
    pub outer_iteration: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub delta: Vec<f64>,
    /// `‖delta‖₂`, infinite when unsuccessful.
    pub norm: f64,
    pub success: bool,
    pub original_class: usize,
    /// Class of `x + (1 + boundary_tol)·delta` on success.
    pub adversarial_class: Option<usize>,
    pub regions_checked: usize,
    pub qp_calls: usize,
    /// Extra solves that moved a minimizer off the boundary of its feasible
    /// set after it failed the pushed check; not counted in `qp_calls`.
    pub interior_resolves: usize,
    /// Norm of the warm start the search was seeded with, if one was accepted.
    pub warm_start_norm: Option<f64>,
    /// Norm of the best perturbation on the region of `x` itself.
    pub first_region_norm: Option<f64>,
    pub trace: Vec<TraceEntry>,
    /// Signatures of all regions solved, in visiting order.
    pub visited: Vec<Signature>,
    /// Regions skipped because a QP failed.
    pub solver_failures: usize,
    /// Candidates discarded because neither the minimizer nor its interior
    /// re-solve passed the pushed check.
    pub rejected_candidates: usize,
}

/// True iff `x + (1 + push)·delta` is classified differently from `current`.
pub fn is_adversarial(net: &Network, x: &[f64], current: usize, delta: &[f64], push: f64) -> bool {
    let z: Vec<f64> = x
        .iter()
        .zip(delta)
        .map(|(&xi, &di)| xi + (1.0 + push) * di)
        .collect();
    net.classify(&z).map(|c| c != current).unwrap_or(false)
}
