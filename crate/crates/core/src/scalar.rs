//! Scalar abstraction for all fusion math: `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar used throughout the fusion math.
///
/// The concrete aliases at the crate root instantiate everything with `f64`;
/// `f32` works the same way at reduced precision.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` literals (configuration, file payloads).
    fn from_f64_lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 literal")
    }

    /// Widening conversion for serialization and diagnostics.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
