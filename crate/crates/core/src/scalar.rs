//! Scalar abstraction for the geometry and loss code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar usable for box coordinates: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumCast + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the type cannot hold it
    /// (never the case for `f32`/`f64`).
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Clamps `v` to `[lo, hi]`; NaN maps to `lo`.
#[inline]
pub fn clamp<T: Real>(v: T, lo: T, hi: T) -> T {
    if v.is_nan() || v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}
