//! Scalar abstraction for the numerical core.
//!
//! Everything statistical in this crate is generic over [`Real`], so the same
//! code runs in `f32` or `f64`. Concrete aliases for the common `f64`
//! instantiation live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for lossy conversion from `f64` constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Shorthand for conversion from counts.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count fits in scalar")
    }
}

impl<T> Real for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}
