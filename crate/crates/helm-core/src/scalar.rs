//! Floating-point scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point types the solver kernels are generic over (`f32`, `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    ///
    /// Constants that underflow the target type degrade to zero, which keeps
    /// threshold guards meaningful on `f32`.
    fn fr(x: f64) -> Self {
        match Self::from_f64(x) {
            Some(v) if v.is_finite() => v,
            _ => {
                if x > 0.0 {
                    Self::max_value()
                } else if x < 0.0 {
                    -Self::max_value()
                } else {
                    Self::zero()
                }
            }
        }
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}
