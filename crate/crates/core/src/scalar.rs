//! Floating-point abstraction so model math can run in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar type for feature values, weights, probabilities, and losses.
///
/// Implemented for `f32` and `f64`. The bound set is what the training and
/// scoring kernels need: full float arithmetic, `+=`-style operators,
/// iterator sums, conversions to and from `f64`, and thread safety so
/// ensemble members can train in parallel.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Casts an `f64` into this scalar type, rounding if necessary.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("every f64 is representable in a float type")
    }

    /// Casts a count into this scalar type, rounding if necessary.
    fn cast_usize(value: usize) -> Self {
        Self::cast(value as f64)
    }

    /// Widens this scalar to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("every float widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
