//! Fourier pseudo-spectral solver for the semilinear Klein-Gordon equation
//!
//! ```text
//! u_tt - u_xx + rho u = f(u),    x in [-pi, pi) periodic
//! ```
//!
//! The crate provides the spectral discretization ([`spectral`]), problem
//! definitions and rough random initial data ([`problem`]), three time
//! integrators ([`integrators`]) and the experiment harness used to measure
//! convergence order, efficiency and long-time energy behaviour
//! ([`experiments`]).
//!
//! The numerical core is generic over the floating-point type through
//! [`Scalar`]; the aliases at the crate root fix it to `f64`, which is what the
//! experiment harness uses.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod integrators;
pub mod problem;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use integrators::{MethodTag, Observation, Trajectory, TwoStepState};
pub use problem::{CountingProblem, Nonlinearity, Problem, ProblemSpec, SpectralState};
pub use rustfft::num_complex::Complex;
pub use scalar::Scalar;
pub use spectral::{eval_filter, CoeffVector, FilterKind, Grid, PhysicalField};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type CoeffVector64 = CoeffVector<f64>;
pub type PhysicalField64 = PhysicalField<f64>;
pub type SpectralState64 = SpectralState<f64>;
pub type TwoStepState64 = TwoStepState<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
