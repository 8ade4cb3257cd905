//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the engine is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Byte width tag recorded in snapshots.
    const WIDTH: u8;

    /// Lossless for `f64`; rounds to nearest for `f32`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 always converts to a float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float always converts to f64")
    }

    /// Smallest positive value we treat as a usable firing-strength sum.
    fn firing_floor() -> Self {
        let v = Self::of(1e-300);
        if v > Self::zero() {
            v
        } else {
            Self::min_positive_value()
        }
    }
}

impl Real for f32 {
    const WIDTH: u8 = 4;
}

impl Real for f64 {
    const WIDTH: u8 = 8;
}
