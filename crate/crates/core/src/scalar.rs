//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar the flow, oracle and analytics code is generic over.
///
/// Implemented for `f32` and `f64`. Constants written as `f64` literals are
/// brought into `T` with [`Scalar::of`].
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `sign(n - m)` as used by the band-preserving generator.
#[inline]
pub(crate) fn index_sign<T: Scalar>(n: usize, m: usize) -> T {
    match n.cmp(&m) {
        std::cmp::Ordering::Greater => T::one(),
        std::cmp::Ordering::Less => -T::one(),
        std::cmp::Ordering::Equal => T::zero(),
    }
}
