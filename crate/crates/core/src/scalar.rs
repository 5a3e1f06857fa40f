//! Floating-point abstraction the numeric routines are generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Scalar type for series values, coefficients and metrics: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for numeric literals and tabulated constants.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from(x).expect("f64 literal convertible to scalar")
    }

    /// Lossy widening to `f64`, for table lookups done in double precision.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum<T> + Debug + Display + Send + Sync + 'static
{
}
