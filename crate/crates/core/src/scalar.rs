//! Scalar abstraction for the geometry layer.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point scalar accepted by the geometric types: `f32` or `f64`.
pub trait Real: num_traits::Float + num_traits::FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static {
    /// Converts a literal constant.
    fn lit(value: f64) -> Self;

    /// Tolerance used for rigidity checks. `1e-9` for `f64`, scaled to the
    /// type's epsilon for narrower floats.
    fn rigid_tolerance() -> Self {
        let eps = Self::epsilon() * Self::lit(100.0);
        let base = Self::lit(1e-9);
        if eps > base {
            eps
        } else {
            base
        }
    }
}

impl Real for f32 {
    #[inline]
    fn lit(value: f64) -> Self {
        value as f32
    }
}

impl Real for f64 {
    #[inline]
    fn lit(value: f64) -> Self {
        value
    }
}
