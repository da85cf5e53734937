//! Scalar abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the numeric kernels are generic over (f32 or f64).
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64 for literals and tolerances.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    /// Conversion from usize counts.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count fits scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}
