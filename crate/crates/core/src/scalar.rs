//! Scalar element trait: f32 or f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Real scalar usable as a matrix element.
///
/// `Float` brings `NumCast`, so conversions through `f64` are always
/// available for tolerance math and timing models.
pub trait Scalar:
    Float + NumAssign + Sum + Send + Sync + Debug + Display + Default + 'static
{
    /// Lossless-enough conversion for norms and error measures.
    fn to_f64(self) -> f64 {
        num_traits::cast(self).unwrap()
    }

    /// Inverse of [`Scalar::to_f64`]; panics on non-finite overflow.
    fn from_f64(x: f64) -> Self {
        num_traits::cast(x).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
