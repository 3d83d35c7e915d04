//! Scalar abstraction for the numeric core.
//!
//! All math in this crate is written against [`Real`] so the same code runs in
//! f32 or f64. The trainer and CLI instantiate everything at f64; see the type
//! aliases at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting literals and rng draws into the working scalar.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 converts to any Real")
}

/// Lossy conversion back to f64 for logging and CSV output.
#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().expect("Real converts to f64")
}
