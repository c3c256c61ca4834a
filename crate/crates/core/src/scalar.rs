//! Scalar abstraction shared by the network, geometry and QP modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the numeric core is generic over.
///
/// Solver tolerances are pinned for `f64`; `TOLERANCE_SCALE` widens them for
/// lower-precision types.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    const TOLERANCE_SCALE: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const TOLERANCE_SCALE: f64 = 1.0;
}

impl Scalar for f32 {
    const TOLERANCE_SCALE: f64 = 1e4;
}
