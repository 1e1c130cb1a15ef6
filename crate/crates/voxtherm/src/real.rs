//! Floating-point scalar abstraction: f32 or f64.

use std::fmt;
use std::iter::Sum;

/// Scalar type the numerical core is generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + 'static
{
    /// Convert an f64 constant into this scalar type.
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite f64 constant")
    }

    /// Lossless widening for output formatting.
    fn to_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}
