//! Minimum-norm adversarial perturbations for fully connected ReLU
//! classifiers.
//!
//! A ReLU network is affine on each of its linear regions, so on a fixed
//! region the smallest ℓ2 perturbation that flips the decision is a convex
//! quadratic program. The [`attacks`] module searches a randomized sequence
//! of regions around the input (exploration around a working set of good
//! perturbations, then local search around the incumbent) and solves one QP
//! per region; [`oracle`] enumerates every activation pattern of a small
//! network to obtain the exact optimum for comparison.
//!
//! The numeric core ([`network`], [`geometry`], [`qpsolve`]) is generic over
//! [`Scalar`]; the aliases at the crate root fix it to `f64`, which is what
//! the attacks use.

pub mod attacks;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod qpsolve;
pub mod scalar;

pub use error::{Error, Result};
pub use network::{argmax, Signature};
pub use qpsolve::{QpSettings, QpStatus};
pub use scalar::Scalar;

pub type Network = network::Network<f64>;
pub type Layer = network::Layer<f64>;
pub type LayerTrace = network::LayerTrace<f64>;
pub type AffineMap = network::AffineMap<f64>;
pub type LocalAffine = network::LocalAffine<f64>;
pub type Polytope = geometry::Polytope<f64>;
pub type BoxConstraint = geometry::BoxConstraint<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type QpProblem = qpsolve::QpProblem<f64>;
pub type QpSolution = qpsolve::QpSolution<f64>;
pub type KktTolerances = qpsolve::KktTolerances<f64>;

/// Single-precision variants of the generic numeric types.
pub mod f32 {
    pub type Network = crate::network::Network<f32>;
    pub type Polytope = crate::geometry::Polytope<f32>;
    pub type BoxConstraint = crate::geometry::BoxConstraint<f32>;
    pub type QpProblem = crate::qpsolve::QpProblem<f32>;
    pub type QpSolution = crate::qpsolve::QpSolution<f32>;
}
