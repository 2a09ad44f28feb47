//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

use crate::linear::SparseLu;

/// Floating-point type the discretization can be instantiated with.
///
/// Implemented for `f32` and `f64`. The sparse factorization backend is part
/// of the bound so that every generic routine can solve linear systems.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
    + SparseLu
{
    /// Relative residual the direct solver must reach for this precision.
    fn solve_tolerance() -> Self;

    /// Lossy conversion from `f64`, used for literals and configuration.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn solve_tolerance() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn solve_tolerance() -> Self {
        1e-4
    }
}
