//! Klein-Gordon problem data: the nonlinearity and its potential, the
//! discrete energy, rough random initial data and the exact linear flow.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{sinc, CoeffVector, Grid, PhysicalField};

/// RNG stream carrying the displacement coefficients.
pub const DISPLACEMENT_STREAM: u64 = 0;
/// RNG stream carrying the velocity coefficients.
pub const VELOCITY_STREAM: u64 = 1;

/// Registered nonlinearities `f` with their potentials `U`, `f = -U'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    /// `f(u) = sin(u)`, `U(u) = 1 + cos(u)`
    Sine,
    /// `f(u) = -u^3`, `U(u) = u^4 / 4`
    CubicDefocusing,
    /// `f = 0`, `U = 0`; the linear Klein-Gordon equation
    Linear,
}

impl Nonlinearity {
    pub const ALL: [Nonlinearity; 3] = [
        Nonlinearity::Sine,
        Nonlinearity::CubicDefocusing,
        Nonlinearity::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Sine => "sine",
            Nonlinearity::CubicDefocusing => "cubic-defocusing",
            Nonlinearity::Linear => "linear",
        }
    }

    pub fn f<T: Scalar>(self, u: T) -> T {
        match self {
            Nonlinearity::Sine => u.sin(),
            Nonlinearity::CubicDefocusing => -u * u * u,
            Nonlinearity::Linear => T::zero(),
        }
    }

    /// Derivative `f'(u)`.
    pub fn df<T: Scalar>(self, u: T) -> T {
        match self {
            Nonlinearity::Sine => u.cos(),
            Nonlinearity::CubicDefocusing => -T::lit(3.0) * u * u,
            Nonlinearity::Linear => T::zero(),
        }
    }

    pub fn potential<T: Scalar>(self, u: T) -> T {
        match self {
            Nonlinearity::Sine => T::one() + u.cos(),
            Nonlinearity::CubicDefocusing => u * u * u * u / T::lit(4.0),
            Nonlinearity::Linear => T::zero(),
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sine" | "sin" => Ok(Nonlinearity::Sine),
            "cubic-defocusing" | "cubic" => Ok(Nonlinearity::CubicDefocusing),
            "linear" | "none" => Ok(Nonlinearity::Linear),
            other => Err(format!(
                "unknown nonlinearity `{other}` (expected sine, cubic-defocusing or linear)"
            )),
        }
    }
}

/// Access to the nonlinearity as seen by the integrators.
///
/// The spectral evaluations have default implementations; wrappers such as
/// [`CountingProblem`] override them to observe how often they are called.
pub trait Problem<T: Scalar>: Sync {
    fn f(&self, u: T) -> T;

    fn df(&self, u: T) -> T;

    fn potential(&self, u: T) -> T;

    /// Pointwise `f` on grid samples.
    fn eval_f(&self, field: &PhysicalField<T>) -> PhysicalField<T> {
        field.map(|u| self.f(u))
    }

    /// Pseudo-spectral nonlinearity `F f(F^-1 q)`.
    fn spectral_f(&self, grid: &Grid<T>, q: &CoeffVector<T>) -> Result<CoeffVector<T>> {
        let u = grid.from_spectral(q)?;
        grid.to_spectral(&self.eval_f(&u))
    }

    /// `F (f'(u) v)` with `u = F^-1 q` and `v = F^-1 p`, formed on the grid.
    fn spectral_df_product(
        &self,
        grid: &Grid<T>,
        q: &CoeffVector<T>,
        p: &CoeffVector<T>,
    ) -> Result<CoeffVector<T>> {
        let u = grid.from_spectral(q)?;
        let v = grid.from_spectral(p)?;
        let prod = PhysicalField::new(
            u.values
                .iter()
                .zip(&v.values)
                .map(|(&u, &v)| self.df(u) * v)
                .collect(),
        );
        grid.to_spectral(&prod)
    }
}

impl<T: Scalar, P: Problem<T> + ?Sized> Problem<T> for &P {
    fn f(&self, u: T) -> T {
        (**self).f(u)
    }

    fn df(&self, u: T) -> T {
        (**self).df(u)
    }

    fn potential(&self, u: T) -> T {
        (**self).potential(u)
    }

    fn eval_f(&self, field: &PhysicalField<T>) -> PhysicalField<T> {
        (**self).eval_f(field)
    }

    fn spectral_f(&self, grid: &Grid<T>, q: &CoeffVector<T>) -> Result<CoeffVector<T>> {
        (**self).spectral_f(grid, q)
    }

    fn spectral_df_product(
        &self,
        grid: &Grid<T>,
        q: &CoeffVector<T>,
        p: &CoeffVector<T>,
    ) -> Result<CoeffVector<T>> {
        (**self).spectral_df_product(grid, q, p)
    }
}

/// Problem parameters and the recipe for the initial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec<T> {
    pub rho: T,
    pub nonlinearity: Nonlinearity,
    /// Regularity exponent: the initial data lies in `H^theta x H^(theta-1)`.
    pub theta: T,
    /// Multiplier applied after normalizing the initial data.
    pub data_scale: T,
    pub seed: u64,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(nonlinearity: Nonlinearity) -> Self {
        ProblemSpec {
            rho: T::zero(),
            nonlinearity,
            theta: T::lit(10.0),
            data_scale: T::one(),
            seed: 0,
        }
    }

    pub fn with_rho(mut self, rho: T) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_data_scale(mut self, data_scale: T) -> Self {
        self.data_scale = data_scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Grid with `2M` points for this problem's mass parameter.
    pub fn grid(&self, half_modes: usize) -> Result<Grid<T>> {
        Grid::new(half_modes, self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > T::zero()) || !self.theta.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if !(self.data_scale > T::zero()) || !self.data_scale.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "data_scale must be positive, got {}",
                self.data_scale
            )));
        }
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "rho must be nonnegative, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Problem<T> for ProblemSpec<T> {
    fn f(&self, u: T) -> T {
        self.nonlinearity.f(u)
    }

    fn df(&self, u: T) -> T {
        self.nonlinearity.df(u)
    }

    fn potential(&self, u: T) -> T {
        self.nonlinearity.potential(u)
    }
}

/// Wrapper that counts spectral nonlinearity evaluations.
#[derive(Debug)]
pub struct CountingProblem<P> {
    inner: P,
    f_evals: AtomicU64,
    df_evals: AtomicU64,
}

impl<P> CountingProblem<P> {
    pub fn new(inner: P) -> Self {
        CountingProblem {
            inner,
            f_evals: AtomicU64::new(0),
            df_evals: AtomicU64::new(0),
        }
    }

    /// Number of `spectral_f` calls so far.
    pub fn f_evals(&self) -> u64 {
        self.f_evals.load(Ordering::Relaxed)
    }

    /// Number of `spectral_df_product` calls so far.
    pub fn df_evals(&self) -> u64 {
        self.df_evals.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.f_evals.store(0, Ordering::Relaxed);
        self.df_evals.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<T: Scalar, P: Problem<T>> Problem<T> for CountingProblem<P> {
    fn f(&self, u: T) -> T {
        self.inner.f(u)
    }

    fn df(&self, u: T) -> T {
        self.inner.df(u)
    }

    fn potential(&self, u: T) -> T {
        self.inner.potential(u)
    }

    fn spectral_f(&self, grid: &Grid<T>, q: &CoeffVector<T>) -> Result<CoeffVector<T>> {
        self.f_evals.fetch_add(1, Ordering::Relaxed);
        self.inner.spectral_f(grid, q)
    }

    fn spectral_df_product(
        &self,
        grid: &Grid<T>,
        q: &CoeffVector<T>,
        p: &CoeffVector<T>,
    ) -> Result<CoeffVector<T>> {
        self.df_evals.fetch_add(1, Ordering::Relaxed);
        self.inner.spectral_df_product(grid, q, p)
    }
}

/// Displacement and velocity coefficients at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState<T> {
    pub q: CoeffVector<T>,
    pub p: CoeffVector<T>,
    pub t: T,
}

impl<T: Scalar> SpectralState<T> {
    pub fn new(q: CoeffVector<T>, p: CoeffVector<T>, t: T) -> Self {
        SpectralState { q, p, t }
    }

    pub fn zeros(len: usize) -> Self {
        SpectralState {
            q: CoeffVector::zeros(len),
            p: CoeffVector::zeros(len),
            t: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.t.is_finite()
    }

    /// Both components multiplied by `factor`; time unchanged.
    pub fn scaled(&self, factor: T) -> Self {
        SpectralState {
            q: self.q.scaled(factor),
            p: self.p.scaled(factor),
            t: self.t,
        }
    }
}

/// Discrete energy `1/2 (|p|_L2^2 + |q|_H1^2) + mean_k U(u(x_k))`.
pub fn discrete_energy<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    state: &SpectralState<T>,
) -> Result<T> {
    let kinetic = grid.hs_norm(&state.p, T::zero());
    let elastic = grid.hs_norm(&state.q, T::one());
    let u = grid.from_spectral(&state.q)?;
    let potential = u
        .values
        .iter()
        .fold(T::zero(), |acc, &v| acc + problem.potential(v))
        / T::of_usize(grid.len());
    Ok((kinetic * kinetic + elastic * elastic) / T::lit(2.0) + potential)
}

/// Random initial data in `H^theta x H^(theta-1)`, normalized so that
/// `|q|_H1 = |p|_L2 = data_scale`.
///
/// Mode `j` of `q` is drawn as `xi_j <j>^(-theta-1/2)` with `<j> = max(1, |j|)`
/// and `xi_j` having real and imaginary parts uniform on `[-1, 1]`; `p` uses
/// `theta - 1` in place of `theta`. Negative modes are mirrored, the mean modes
/// are real, the Nyquist mode is zero.
///
/// The generator is ChaCha8 seeded with `spec.seed`; `q` is drawn from stream
/// [`DISPLACEMENT_STREAM`] and `p` from [`VELOCITY_STREAM`], each in the order
/// mode 0 then modes `1..M-1` (real part before imaginary part). Growing `M`
/// therefore only appends modes.
pub fn rough_initial_data<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<SpectralState<T>> {
    spec.validate()?;
    let q = rough_component(grid, spec.seed, DISPLACEMENT_STREAM, spec.theta, T::one())?;
    let p = rough_component(
        grid,
        spec.seed,
        VELOCITY_STREAM,
        spec.theta - T::one(),
        T::zero(),
    )?;
    Ok(SpectralState {
        q: q.scaled(spec.data_scale),
        p: p.scaled(spec.data_scale),
        t: T::zero(),
    })
}

fn rough_component<T: Scalar>(
    grid: &Grid<T>,
    seed: u64,
    stream: u64,
    regularity: T,
    norm_index: T,
) -> Result<CoeffVector<T>> {
    const MAX_DRAWS: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let m = grid.half_modes() as isize;
    let exponent = -regularity - T::lit(0.5);
    for _ in 0..MAX_DRAWS {
        let mut c = CoeffVector::zeros(grid.len());
        let mean: f64 = rng.random_range(-1.0..=1.0);
        c.set(0, Complex::new(T::lit(mean), T::zero()));
        for j in 1..m {
            let re: f64 = rng.random_range(-1.0..=1.0);
            let im: f64 = rng.random_range(-1.0..=1.0);
            let weight = T::of_usize(j as usize).powf(exponent);
            let z = Complex::new(T::lit(re), T::lit(im)) * weight;
            c.set(j, z);
            c.set(-j, z.conj());
        }
        let norm = grid.hs_norm(&c, norm_index);
        if norm > T::zero() && norm.is_finite() {
            return Ok(c.scaled(T::one() / norm));
        }
    }
    Err(Error::InvalidProblem(
        "random initial data has zero norm".to_string(),
    ))
}

/// Exact flow of the linear equation `q'' + Omega^2 q = 0` over time `t`.
pub fn linear_flow<T: Scalar>(grid: &Grid<T>, state: &SpectralState<T>, t: T) -> SpectralState<T> {
    let mut q = CoeffVector::zeros(grid.len());
    let mut p = CoeffVector::zeros(grid.len());
    let (q_out, p_out) = (q.as_mut_slice(), p.as_mut_slice());
    for (i, &w) in grid.omega().iter().enumerate() {
        let x = t * w;
        let (s, c) = x.sin_cos();
        let q0 = state.q.as_slice()[i];
        let p0 = state.p.as_slice()[i];
        q_out[i] = q0 * c + p0 * (t * sinc(x));
        p_out[i] = q0 * (-w * s) + p0 * c;
    }
    SpectralState {
        q,
        p,
        t: state.t + t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nonlinearities_vanish_at_zero() {
        for nl in Nonlinearity::ALL {
            assert_eq!(nl.f(0.0f64), 0.0);
        }
    }

    #[test]
    fn eval_f_examples() {
        let g = Grid::<f64>::new(4, 0.0).unwrap();
        let sine = ProblemSpec::<f64>::new(Nonlinearity::Sine);
        let zeros = PhysicalField::sample(&g, |_| 0.0);
        assert_eq!(sine.eval_f(&zeros), zeros);
        let halfpi = PhysicalField::sample(&g, |_| PI / 2.0);
        assert!(sine.eval_f(&halfpi).values.iter().all(|&v| v == 1.0));
        let cubic = ProblemSpec::<f64>::new(Nonlinearity::CubicDefocusing);
        let twos = PhysicalField::sample(&g, |_| 2.0);
        assert!(cubic.eval_f(&twos).values.iter().all(|&v| v == -8.0));
    }

    #[test]
    fn potential_examples() {
        assert_eq!(Nonlinearity::Sine.potential(0.0f64), 2.0);
        assert!(Nonlinearity::Sine.potential(PI).abs() < 1e-15);
        assert_eq!(Nonlinearity::CubicDefocusing.potential(2.0f64), 4.0);
    }

    #[test]
    fn spectral_f_examples() {
        let g = Grid::<f64>::new(4, 0.0).unwrap();
        let sine = ProblemSpec::<f64>::new(Nonlinearity::Sine);
        let zero = CoeffVector::zeros(8);
        assert_eq!(sine.spectral_f(&g, &zero).unwrap(), zero);
        let q = CoeffVector::unit(8, 0, Complex::new(PI / 2.0, 0.0));
        let out = sine.spectral_f(&g, &q).unwrap();
        for j in g.modes() {
            let expected = if j == 0 { 1.0 } else { 0.0 };
            assert!((out.get(j) - Complex::new(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_state_energy_is_potential_at_zero() {
        let g = Grid::<f64>::new(8, 0.0).unwrap();
        let sine = ProblemSpec::<f64>::new(Nonlinearity::Sine);
        let e = discrete_energy(&sine, &g, &SpectralState::zeros(16)).unwrap();
        assert!((e - 2.0).abs() < 1e-15);
    }

    #[test]
    fn initial_data_is_normalized_and_real() {
        for m in [16usize, 64, 256] {
            for seed in [0u64, 1, 42] {
                let spec = ProblemSpec::<f64>::new(Nonlinearity::Sine)
                    .with_theta(1.5)
                    .with_seed(seed)
                    .with_data_scale(0.25);
                let g = spec.grid(m).unwrap();
                let s = rough_initial_data(&spec, &g).unwrap();
                assert!((g.hs_norm(&s.q, 1.0) - 0.25).abs() < 1e-12);
                assert!((g.hs_norm(&s.p, 0.0) - 0.25).abs() < 1e-12);
                assert!(s.q.symmetry_defect() == 0.0 && s.p.symmetry_defect() == 0.0);
                assert_eq!(s.q.get(-(m as isize)), Complex::new(0.0, 0.0));
                assert_eq!(s.t, 0.0);
            }
        }
    }

    #[test]
    fn initial_data_is_deterministic() {
        let spec = ProblemSpec::<f64>::new(Nonlinearity::Sine).with_seed(7);
        let g = spec.grid(32).unwrap();
        let a = rough_initial_data(&spec, &g).unwrap();
        let b = rough_initial_data(&spec, &g).unwrap();
        assert_eq!(a, b);
        let c = rough_initial_data(&spec.with_seed(8), &g).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_problem_parameters_are_rejected() {
        let g = Grid::<f64>::new(8, 0.0).unwrap();
        let spec = ProblemSpec::<f64>::new(Nonlinearity::Sine).with_theta(0.0);
        assert!(rough_initial_data(&spec, &g).is_err());
        let spec = ProblemSpec::<f64>::new(Nonlinearity::Sine).with_data_scale(-1.0);
        assert!(rough_initial_data(&spec, &g).is_err());
    }

    #[test]
    fn linear_flow_rotates_a_unit_mode() {
        let g = Grid::<f64>::new(4, 0.0).unwrap();
        let mut s = SpectralState::zeros(8);
        s.q.set(1, Complex::new(1.0, 0.0));
        let out = linear_flow(&g, &s, PI / 2.0);
        assert!(out.q.get(1).norm() < 1e-15);
        assert!((out.p.get(1) - Complex::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(linear_flow(&g, &s, 0.0), s);
    }

    #[test]
    fn counting_wrapper_counts() {
        let g = Grid::<f64>::new(4, 0.0).unwrap();
        let counted = CountingProblem::new(ProblemSpec::<f64>::new(Nonlinearity::Sine));
        let z = CoeffVector::zeros(8);
        counted.spectral_f(&g, &z).unwrap();
        counted.spectral_f(&g, &z).unwrap();
        counted.spectral_df_product(&g, &z, &z).unwrap();
        assert_eq!((counted.f_evals(), counted.df_evals()), (2, 1));
        counted.reset();
        assert_eq!(counted.f_evals(), 0);
    }

    #[test]
    fn nonlinearity_names_round_trip() {
        for nl in Nonlinearity::ALL {
            assert_eq!(nl.name().parse::<Nonlinearity>().unwrap(), nl);
        }
        assert!("quintic".parse::<Nonlinearity>().is_err());
    }
}
