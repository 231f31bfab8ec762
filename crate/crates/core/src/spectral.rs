//! Periodic grid on `[-pi, pi)`, discrete Fourier transforms and diagonal
//! operators that are functions of the frequency operator `Omega`.
//!
//! Coefficient vectors hold the `2M` modes `j = -M..M-1` in natural order, so
//! index `i` corresponds to mode `j = i - M`. The forward transform carries the
//! `1/(2M)` normalization and the inverse carries none:
//!
//! ```text
//! c_j = 1/(2M) sum_k u(x_k) exp(-i j x_k),     u(x_k) = sum_j c_j exp(i j x_k)
//! ```
//!
//! with grid points `x_k = k pi / M`, `k = -M..M-1`.

use std::fmt;
use std::sync::Arc;

use num_traits::Float;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this `|x|` the sinc symbol uses its Taylor expansion.
pub const SINC_TAYLOR_SWITCH: f64 = 1e-4;

/// Below this `|x|` the starting-value symbol `(sinc x - cos x) / x^2` uses its
/// Taylor expansion (double precision).
///
/// The direct quotient loses about `eps / x^2` to cancellation, so the switch
/// sits where that loss and the truncation error of the series are both below
/// `1e-13`.
pub const START_TAYLOR_SWITCH: f64 = 0.05;

/// Switch used for scalar types with less than double precision.
const START_TAYLOR_SWITCH_LOW_PRECISION: f64 = 0.5;

fn start_switch<T: Scalar>() -> T {
    if T::epsilon() > T::lit(1e-10) {
        T::lit(START_TAYLOR_SWITCH_LOW_PRECISION)
    } else {
        T::lit(START_TAYLOR_SWITCH)
    }
}

/// Relative tolerance on the imaginary residue of an inverse transform that is
/// expected to be real.
pub fn real_residue_tolerance<T: Scalar>() -> T {
    T::epsilon() * T::lit(4096.0)
}

/// Uniform periodic grid with `2M` points and the frequencies `omega_j =
/// sqrt(j^2 + rho)` of the operator `-d^2/dx^2 + rho`.
#[derive(Clone)]
pub struct Grid<T: Scalar> {
    half_modes: usize,
    rho: T,
    points: Vec<T>,
    omega: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_modes", &self.half_modes)
            .field("rho", &self.rho)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> Grid<T> {
    /// Builds the grid for `2M` points and mass parameter `rho`.
    ///
    /// Requires `M >= 2` and a finite `rho >= 0`.
    pub fn new(half_modes: usize, rho: T) -> Result<Self> {
        if half_modes < 2 {
            return Err(Error::InvalidGrid(format!(
                "half mode count must be at least 2, got {half_modes}"
            )));
        }
        if !(rho >= T::zero()) || !rho.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "mass parameter must be finite and nonnegative, got {rho}"
            )));
        }
        let len = 2 * half_modes;
        let m = T::of_usize(half_modes);
        let spacing = T::PI() / m;
        let points = (0..len).map(|i| (T::of_usize(i) - m) * spacing).collect();
        let omega = (0..len)
            .map(|i| {
                let j = T::of_usize(i) - m;
                (j * j + rho).sqrt()
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        Ok(Grid {
            half_modes,
            rho,
            points,
            omega,
            forward,
            inverse,
        })
    }

    /// `M`, half the number of grid points.
    pub fn half_modes(&self) -> usize {
        self.half_modes
    }

    /// `2M`, the number of grid points and of Fourier modes.
    pub fn len(&self) -> usize {
        2 * self.half_modes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Grid points `x_k = k pi / M` for `k = -M..M-1`.
    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Frequencies in natural mode order `j = -M..M-1`.
    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Frequency of mode `j`, `-M <= j < M`.
    pub fn omega_of(&self, mode: isize) -> T {
        self.omega[self.index_of(mode)]
    }

    /// Modes `j = -M..M-1` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = isize> {
        let m = self.half_modes as isize;
        -m..m
    }

    pub fn index_of(&self, mode: isize) -> usize {
        let m = self.half_modes as isize;
        assert!((-m..m).contains(&mode), "mode {mode} outside -{m}..{m}");
        (mode + m) as usize
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    /// `(-1)^j` for the mode stored at index `i`.
    fn parity(&self, index: usize) -> T {
        // j = i - M, so (-1)^j = (-1)^(i + M).
        if (index + self.half_modes).is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    }

    /// Storage slot in FFT order for the mode at natural index `i`.
    fn fft_slot(&self, index: usize) -> usize {
        (index + self.half_modes) % self.len()
    }

    /// Forward transform of real samples.
    pub fn to_spectral(&self, field: &PhysicalField<T>) -> Result<CoeffVector<T>> {
        self.check_len(field.len())?;
        let mut buf: Vec<Complex<T>> = field
            .values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        self.forward.process(&mut buf);
        let scale = T::one() / T::of_usize(self.len());
        let coeffs = (0..self.len())
            .map(|i| buf[self.fft_slot(i)] * (self.parity(i) * scale))
            .collect();
        Ok(CoeffVector { coeffs })
    }

    /// Inverse transform without any symmetry assumption.
    pub fn from_spectral_complex(&self, coeffs: &CoeffVector<T>) -> Result<Vec<Complex<T>>> {
        self.check_len(coeffs.len())?;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.len()];
        for (i, c) in coeffs.coeffs.iter().enumerate() {
            buf[self.fft_slot(i)] = *c * self.parity(i);
        }
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// Inverse transform to real samples.
    ///
    /// The imaginary residue is discarded when it is below
    /// [`real_residue_tolerance`] times the field magnitude; otherwise the
    /// coefficients are not the spectrum of a real field and an error is
    /// returned.
    pub fn from_spectral(&self, coeffs: &CoeffVector<T>) -> Result<PhysicalField<T>> {
        let buf = self.from_spectral_complex(coeffs)?;
        let mut residual = T::zero();
        let mut magnitude = T::zero();
        for z in &buf {
            residual = residual.max(Float::abs(z.im));
            magnitude = magnitude.max(Float::abs(z.re));
        }
        if residual > real_residue_tolerance::<T>() * magnitude {
            return Err(Error::SymmetryViolation {
                residual: residual.to_f64_lossy(),
            });
        }
        Ok(PhysicalField {
            values: buf.into_iter().map(|z| z.re).collect(),
        })
    }

    /// Applies the diagonal operator `kind(h Omega)` mode by mode.
    pub fn apply_symbol(
        &self,
        kind: FilterKind,
        h: T,
        coeffs: &CoeffVector<T>,
    ) -> Result<CoeffVector<T>> {
        self.check_len(coeffs.len())?;
        let out = coeffs
            .coeffs
            .iter()
            .zip(&self.omega)
            .map(|(c, &w)| *c * eval_filter(kind, h, w))
            .collect();
        Ok(CoeffVector { coeffs: out })
    }

    /// Weighted Sobolev norm `(sum_j omega_j^(2s) |c_j|^2)^(1/2)`.
    ///
    /// A zero frequency contributes `0^0 = 1` for `s = 0`, nothing for
    /// `s > 0`, and is skipped for `s < 0`.
    pub fn hs_norm(&self, coeffs: &CoeffVector<T>, s: T) -> T {
        let two_s = s + s;
        coeffs
            .coeffs
            .iter()
            .zip(&self.omega)
            .filter(|(_, &w)| !(w == T::zero() && s < T::zero()))
            .map(|(c, &w)| w.powf(two_s) * c.norm_sqr())
            .fold(T::zero(), |acc, x| acc + x)
            .sqrt()
    }
}

/// Samples of a real function at the grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> PhysicalField<T> {
    pub fn new(values: Vec<T>) -> Self {
        PhysicalField { values }
    }

    /// Samples `func` at every point of `grid`.
    pub fn sample(grid: &Grid<T>, func: impl Fn(T) -> T) -> Self {
        PhysicalField {
            values: grid.points().iter().map(|&x| func(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, func: impl Fn(T) -> T) -> Self {
        PhysicalField {
            values: self.values.iter().map(|&v| func(v)).collect(),
        }
    }
}

/// Fourier coefficients for modes `j = -M..M-1`, stored at index `j + M`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector<T> {
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> CoeffVector<T> {
    pub fn zeros(len: usize) -> Self {
        CoeffVector {
            coeffs: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    pub fn from_vec(coeffs: Vec<Complex<T>>) -> Self {
        CoeffVector { coeffs }
    }

    /// Vector with a single nonzero mode.
    pub fn unit(len: usize, mode: isize, value: Complex<T>) -> Self {
        let mut v = Self::zeros(len);
        v.set(mode, value);
        v
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn half_modes(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    /// Coefficient of mode `j`.
    pub fn get(&self, mode: isize) -> Complex<T> {
        self.coeffs[self.slot(mode)]
    }

    pub fn set(&mut self, mode: isize, value: Complex<T>) {
        let slot = self.slot(mode);
        self.coeffs[slot] = value;
    }

    fn slot(&self, mode: isize) -> usize {
        let m = self.half_modes() as isize;
        assert!((-m..m).contains(&mode), "mode {mode} outside -{m}..{m}");
        (mode + m) as usize
    }

    pub fn scaled(&self, factor: T) -> Self {
        CoeffVector {
            coeffs: self.coeffs.iter().map(|c| *c * factor).collect(),
        }
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &Self) -> Self {
        CoeffVector {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of `c_{-j} = conj(c_j)` for `0 < j < M` and of the
    /// reality of `c_0` and `c_{-M}`.
    pub fn symmetry_defect(&self) -> T {
        let m = self.half_modes() as isize;
        let mut defect = Float::abs(self.get(0).im).max(Float::abs(self.get(-m).im));
        for j in 1..m {
            defect = defect.max((self.get(-j) - self.get(j).conj()).norm());
        }
        defect
    }

    /// Whether the vector is the spectrum of a real field, up to `tol` times
    /// its largest coefficient.
    pub fn is_conjugate_symmetric(&self, tol: T) -> bool {
        let scale = self
            .coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.norm()));
        self.symmetry_defect() <= tol * scale
    }
}

/// Scalar functions of `h omega` used as diagonal operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKind {
    /// `cos(h omega)`
    Cos,
    /// `sinc(h omega)`, with `sinc(0) = 1`
    Sinc,
    /// `omega sin(h omega)`
    SinTimesOmega,
    /// `cos(h omega) + sinc(h omega)`
    CosPlusSinc,
    /// `(sinc(h omega) - cos(h omega)) / (2 omega^2)`, equal to
    /// `(h^2 / 2) g(h omega)` with `g` from [`start_kernel`]
    StartSingular,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Cos,
        FilterKind::Sinc,
        FilterKind::SinTimesOmega,
        FilterKind::CosPlusSinc,
        FilterKind::StartSingular,
    ];
}

/// `sin(x) / x`, with the removable singularity filled in.
pub fn sinc<T: Scalar>(x: T) -> T {
    if Float::abs(x) < T::lit(SINC_TAYLOR_SWITCH) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0) - x2 * x2 * x2 / T::lit(5040.0)
    } else {
        x.sin() / x
    }
}

/// `g(x) = (sinc(x) - cos(x)) / x^2`, with `g(0) = 1/3`.
pub fn start_kernel<T: Scalar>(x: T) -> T {
    if Float::abs(x) < start_switch::<T>() {
        start_kernel_series(x)
    } else {
        start_kernel_direct(x)
    }
}

/// Four-term Taylor expansion of [`start_kernel`] about zero.
pub fn start_kernel_series<T: Scalar>(x: T) -> T {
    let x2 = x * x;
    T::one() / T::lit(3.0) - x2 / T::lit(30.0) + x2 * x2 / T::lit(840.0)
        - x2 * x2 * x2 / T::lit(45360.0)
}

/// Direct quotient form of [`start_kernel`]; inaccurate for small `|x|`.
pub fn start_kernel_direct<T: Scalar>(x: T) -> T {
    (x.sin() / x - x.cos()) / (x * x)
}

/// Value of the filter `kind` at frequency `omega` for step `h`.
///
/// Intended for `h > 0`; negative steps are accepted and give the symbols of
/// the time-reversed operators (`Cos`, `Sinc` and `StartSingular` are even in
/// `h`, `SinTimesOmega` is odd).
pub fn eval_filter<T: Scalar>(kind: FilterKind, h: T, omega: T) -> T {
    let x = h * omega;
    match kind {
        FilterKind::Cos => x.cos(),
        FilterKind::Sinc => sinc(x),
        FilterKind::SinTimesOmega => omega * x.sin(),
        FilterKind::CosPlusSinc => x.cos() + sinc(x),
        FilterKind::StartSingular => h * h / T::lit(2.0) * start_kernel(x),
    }
}
