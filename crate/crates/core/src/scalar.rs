//! Scalar abstraction for the numeric core.
//!
//! All channel, delay and allocation math is generic over [`Float`], so the
//! library runs in `f32` or `f64`. The crate root exposes `f64` aliases for
//! the common types; the experiment harness is `f64`-only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{FromPrimitive, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Float:
    num_traits::Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert a finite `f64` constant into the scalar type.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 representable in scalar type")
    }

    /// Widen to `f64` (exact for `f32` and `f64`).
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar representable as f64")
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_roundtrip() {
        let x: f32 = Float::cast(1.5);
        assert_eq!(x, 1.5f32);
        let y: f64 = Float::cast(SPEED_OF_LIGHT);
        assert_eq!(y, 299_792_458.0);
        assert_eq!(1.25f32.as_f64(), 1.25f64);
    }
}
