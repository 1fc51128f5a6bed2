use num_traits::{Float, FromPrimitive, NumAssign, NumCast, ToPrimitive};

/// Floating-point scalar the numeric code is generic over: `f32` or `f64`.
///
/// Extends [`num_traits::Float`] with the Gauss error function (needed for
/// the exact GeLU) and infallible casts to and from `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Gauss error function erf(x).
    fn erf(self) -> Self;

    /// Cast an `f64` constant into this scalar type.
    #[inline]
    fn cast(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 converts to any Scalar")
    }

    /// Widen to `f64` for accumulation, serialization, or display.
    #[inline]
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("Scalar converts to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::cast(n as f64)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
}
