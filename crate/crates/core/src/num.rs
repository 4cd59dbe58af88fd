//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All estimators are generic over a real floating-point type. `f64` is the
//! reference precision; `f32` is supported for embedded-style deployments
//! where the spectrum and solver must run in single precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy widening to `f64`, used for reporting and statistics.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest condition number of a normal-equations matrix `AᴴA` that the
    /// least-squares routines accept before reporting a degenerate support.
    ///
    /// A QR solve loses about `sqrt(cond(AᴴA)) * eps` relative accuracy, so the
    /// limit sits at `1 / sqrt(eps)`.
    #[inline]
    fn degenerate_condition() -> Self {
        Self::epsilon().sqrt().recip()
    }

    #[inline]
    fn deg_to_rad() -> Self {
        Self::PI() / Self::of(180.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(j * phase)` for a real phase.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

/// Signum that maps exact zero to zero.
#[inline]
pub fn sign<T: Real>(x: T) -> i64 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Power ratio expressed in decibels converted to a linear factor.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

#[inline]
pub fn linear_to_db<T: Real>(x: T) -> T {
    T::of(10.0) * x.log10()
}
