//! Floating-point abstraction for the numerical core.

use std::fmt::Display;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Real scalar type the spectral and integrator code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances inside the crate are expressed
/// relative to [`Float::epsilon`] so both widths behave sensibly.
pub trait Scalar: Float + FloatConst + FftNum + Display + Default {
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FloatConst + FftNum + Display + Default {}
