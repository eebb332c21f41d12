//! Scalar abstraction for the continuous-time solver core.
//!
//! All trajectory, survival and fitting math is generic over [`Real`], so the
//! same code runs in `f32` or `f64`. The crate root exposes concrete aliases
//! (`SolverParams64`, ...) for the common case.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` constant into the working scalar.
#[inline]
pub(crate) fn fl<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("scalar constant conversion")
}

/// `sin(pi * x)`, exact zero at integer `x`.
///
/// `Float::sin(PI * x)` returns ~1.2e-16 at `x = 1`, which would break the
/// fixed-point property at hypercube corners; reducing the argument around
/// the nearest integer keeps corners exact.
#[inline]
pub(crate) fn sin_pi<F: Real>(x: F) -> F {
    let n = x.round();
    let s = (F::PI() * (x - n)).sin();
    if n.to_i64().unwrap_or(0) & 1 == 0 {
        s
    } else {
        -s
    }
}
