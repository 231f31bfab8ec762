//! Time integrators for the pseudo-spectral system `q'' + Omega^2 q = F f(F^-1 q)`.
//!
//! * [`MethodTag::Slr`]: the symmetric two-step low-regularity scheme
//!
//!   ```text
//!   q_{n+1} = 2 cos(h Omega) q_n - q_{n-1} + h^2 sinc(h Omega) f~(q_n)
//!   p_{n+1} = -2 h Omega^2 sinc(h Omega) q_n + p_{n-1} + h (cos(h Omega) + sinc(h Omega)) f~(q_n)
//!   ```
//!
//!   started with one step of the low-regularity one-step method below. Each
//!   step evaluates the nonlinearity once.
//! * [`MethodTag::Lr23`]: the second-order one-step low-regularity method,
//!   which also uses the product `f'(u) v`.
//! * [`MethodTag::Ti`]: a classical symmetric trigonometric integrator with
//!   filters `psi = sinc`, `phi = 1` (two nonlinearity evaluations per step).
//!
//! All maps are exact on the linear problem `f = 0`.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::problem::{discrete_energy, Problem, SpectralState};
use crate::scalar::Scalar;
use crate::spectral::{eval_filter, CoeffVector, FilterKind, Grid};

/// Relative tolerance for `T_final / h` to count as an integer.
pub const STEP_COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodTag {
    Slr,
    Lr23,
    Ti,
}

impl MethodTag {
    pub const ALL: [MethodTag; 3] = [MethodTag::Slr, MethodTag::Lr23, MethodTag::Ti];

    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Slr => "SLR",
            MethodTag::Lr23 => "LR23",
            MethodTag::Ti => "TI",
        }
    }

    /// Spectral nonlinearity evaluations per step.
    pub fn f_evals_per_step(self) -> u64 {
        match self {
            MethodTag::Slr | MethodTag::Lr23 => 1,
            MethodTag::Ti => 2,
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SLR" => Ok(MethodTag::Slr),
            "LR23" => Ok(MethodTag::Lr23),
            "TI" => Ok(MethodTag::Ti),
            other => Err(format!(
                "unknown method `{other}` (expected SLR, LR23 or TI)"
            )),
        }
    }
}

/// History window `(u_{n-1}, v_{n-1})`, `(u_n, v_n)` of the two-step scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStepState<T> {
    pub prev: SpectralState<T>,
    pub curr: SpectralState<T>,
    pub h: T,
}

impl<T: Scalar> TwoStepState<T> {
    /// Checks that the two states are one step `h` apart and of equal size.
    pub fn new(prev: SpectralState<T>, curr: SpectralState<T>, h: T) -> Result<Self> {
        if prev.len() != curr.len() {
            return Err(Error::LengthMismatch {
                expected: prev.len(),
                found: curr.len(),
            });
        }
        let gap = curr.t - prev.t - h;
        let scale = T::one().max(num_traits::Float::abs(curr.t));
        if num_traits::Float::abs(gap) > T::lit(1e-12) * scale {
            return Err(Error::InvalidProblem(format!(
                "history states are {} apart, expected step {}",
                curr.t - prev.t,
                h
            )));
        }
        Ok(TwoStepState { prev, curr, h })
    }
}

/// Per-mode filter values for a fixed (possibly negative) step.
#[derive(Clone, Debug)]
struct StepSymbols<T> {
    h: T,
    cos: Vec<T>,
    sinc: Vec<T>,
    omega_sin: Vec<T>,
    start: Vec<T>,
}

impl<T: Scalar> StepSymbols<T> {
    fn new(grid: &Grid<T>, h: T) -> Self {
        let table = |kind| {
            grid.omega()
                .iter()
                .map(|&w| eval_filter(kind, h, w))
                .collect()
        };
        StepSymbols {
            h,
            cos: table(FilterKind::Cos),
            sinc: table(FilterKind::Sinc),
            omega_sin: table(FilterKind::SinTimesOmega),
            start: table(FilterKind::StartSingular),
        }
    }
}

fn check_len<T: Scalar>(grid: &Grid<T>, state: &SpectralState<T>) -> Result<()> {
    for found in [state.q.len(), state.p.len()] {
        if found != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found,
            });
        }
    }
    Ok(())
}

fn check_step<T: Scalar>(h: T) -> Result<()> {
    if h > T::zero() && h < T::one() {
        Ok(())
    } else {
        Err(Error::StepSize(h.to_f64_lossy()))
    }
}

fn lr23_map<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    sym: &StepSymbols<T>,
    state: &SpectralState<T>,
) -> Result<SpectralState<T>> {
    let f = problem.spectral_f(grid, &state.q)?;
    let g = problem.spectral_df_product(grid, &state.q, &state.p)?;
    let h = sym.h;
    let half_h = h / T::lit(2.0);
    let half_h2 = h * h / T::lit(2.0);
    let n = grid.len();
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let (q0, p0) = (state.q.as_slice(), state.p.as_slice());
    let (f, g) = (f.as_slice(), g.as_slice());
    for i in 0..n {
        let (c, s, ws) = (sym.cos[i], sym.sinc[i], sym.omega_sin[i]);
        q.push(q0[i] * c + p0[i] * (h * s) + f[i] * (half_h2 * s) + g[i] * (h * sym.start[i]));
        p.push(q0[i] * (-ws) + p0[i] * c + f[i] * (half_h * (c + s)) + g[i] * (half_h2 * s));
    }
    Ok(SpectralState {
        q: CoeffVector::from_vec(q),
        p: CoeffVector::from_vec(p),
        t: state.t + h,
    })
}

/// One step of the two-step relation from `older` (index `n-1`) and `middle`
/// (index `n`). With a negative step and the arguments swapped this is the
/// backward recursion.
fn two_step_map<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    sym: &StepSymbols<T>,
    older: &SpectralState<T>,
    middle: &SpectralState<T>,
) -> Result<SpectralState<T>> {
    let f = problem.spectral_f(grid, &middle.q)?;
    let h = sym.h;
    let two = T::lit(2.0);
    let n = grid.len();
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let qm = middle.q.as_slice();
    let (qo, po) = (older.q.as_slice(), older.p.as_slice());
    let f = f.as_slice();
    for i in 0..n {
        let (c, s, ws) = (sym.cos[i], sym.sinc[i], sym.omega_sin[i]);
        q.push(qm[i] * (two * c) - qo[i] + f[i] * (h * h * s));
        p.push(qm[i] * (-two * ws) + po[i] + f[i] * (h * (c + s)));
    }
    Ok(SpectralState {
        q: CoeffVector::from_vec(q),
        p: CoeffVector::from_vec(p),
        t: middle.t + h,
    })
}

fn ti_map<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    sym: &StepSymbols<T>,
    state: &SpectralState<T>,
) -> Result<SpectralState<T>> {
    let f0 = problem.spectral_f(grid, &state.q)?;
    let h = sym.h;
    let half_h = h / T::lit(2.0);
    let half_h2 = h * h / T::lit(2.0);
    let (q0, p0, f0) = (state.q.as_slice(), state.p.as_slice(), f0.as_slice());
    let q: Vec<Complex<T>> = (0..grid.len())
        .map(|i| q0[i] * sym.cos[i] + p0[i] * (h * sym.sinc[i]) + f0[i] * (half_h2 * sym.sinc[i]))
        .collect();
    let q = CoeffVector::from_vec(q);
    let f1 = problem.spectral_f(grid, &q)?;
    let f1 = f1.as_slice();
    let p = (0..grid.len())
        .map(|i| {
            q0[i] * (-sym.omega_sin[i]) + p0[i] * sym.cos[i] + (f0[i] * sym.cos[i] + f1[i]) * half_h
        })
        .collect();
    Ok(SpectralState {
        q,
        p: CoeffVector::from_vec(p),
        t: state.t + h,
    })
}

/// One step of the one-step low-regularity method, `0 < h < 1`.
///
/// ```text
/// q+ = cos(hW) q + h sinc(hW) p + h^2/2 sinc(hW) F + h (sinc(hW) - cos(hW)) / (2 W^2) G
/// p+ = -h W^2 sinc(hW) q + cos(hW) p + h/2 (cos(hW) + sinc(hW)) F + h^2/2 sinc(hW) G
/// ```
///
/// with `F = F f(u)` and `G = F (f'(u) v)`.
pub fn lr23_step<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    state: &SpectralState<T>,
    h: T,
) -> Result<SpectralState<T>> {
    check_step(h)?;
    check_len(grid, state)?;
    lr23_map(problem, grid, &StepSymbols::new(grid, h), state)
}

/// Starting window of the two-step scheme: `init` and one [`lr23_step`].
pub fn slr_start<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    init: &SpectralState<T>,
    h: T,
) -> Result<TwoStepState<T>> {
    let curr = lr23_step(problem, grid, init, h)?;
    Ok(TwoStepState {
        prev: init.clone(),
        curr,
        h,
    })
}

/// Advances the two-step window by one step.
pub fn slr_step<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    ts: &TwoStepState<T>,
) -> Result<TwoStepState<T>> {
    check_step(ts.h)?;
    check_len(grid, &ts.prev)?;
    check_len(grid, &ts.curr)?;
    let sym = StepSymbols::new(grid, ts.h);
    let next = two_step_map(problem, grid, &sym, &ts.prev, &ts.curr)?;
    Ok(TwoStepState {
        prev: ts.curr.clone(),
        curr: next,
        h: ts.h,
    })
}

/// Inverse of [`slr_step`]: given the window at `(n, n+1)` returns the window
/// at `(n-1, n)`.
///
/// This is the same relation with `h -> -h` and the time indices swapped.
pub fn slr_step_back<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    ts: &TwoStepState<T>,
) -> Result<TwoStepState<T>> {
    check_step(ts.h)?;
    check_len(grid, &ts.prev)?;
    check_len(grid, &ts.curr)?;
    let sym = StepSymbols::new(grid, -ts.h);
    let earlier = two_step_map(problem, grid, &sym, &ts.curr, &ts.prev)?;
    Ok(TwoStepState {
        prev: earlier,
        curr: ts.prev.clone(),
        h: ts.h,
    })
}

/// One step of the trigonometric comparator.
///
/// ```text
/// q+ = cos(hW) q + h sinc(hW) p + h^2/2 sinc(hW) f~(q)
/// p+ = -W sin(hW) q + cos(hW) p + h/2 (cos(hW) f~(q) + f~(q+))
/// ```
///
/// The map is symmetric, so negative steps (`0 < |h| < 1`) are accepted and
/// invert a forward step.
pub fn ti_step<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    state: &SpectralState<T>,
    h: T,
) -> Result<SpectralState<T>> {
    check_step(num_traits::Float::abs(h))?;
    check_len(grid, state)?;
    ti_map(problem, grid, &StepSymbols::new(grid, h), state)
}

/// Number of steps `n = round(T / h)`, rejecting `|n h - T| > 1e-9 T`.
pub fn step_count<T: Scalar>(h: T, t_final: T) -> Result<usize> {
    let bad = || Error::StepCount {
        t_final: t_final.to_f64_lossy(),
        h: h.to_f64_lossy(),
    };
    if !(t_final > T::zero()) || !t_final.is_finite() || !(h > T::zero()) {
        return Err(bad());
    }
    let n = (t_final / h).round();
    if n < T::one() {
        return Err(bad());
    }
    let tol = T::lit(STEP_COUNT_TOLERANCE).max(T::epsilon() * T::lit(16.0));
    if num_traits::Float::abs(n * h - t_final) > tol * t_final {
        return Err(bad());
    }
    n.to_usize().ok_or_else(bad)
}

/// Diagnostics sampled along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation<T> {
    pub t: T,
    pub energy: T,
    /// `|q|_H1`
    pub h1: T,
    /// `|p|_L2`
    pub l2: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub final_state: SpectralState<T>,
    pub observations: Vec<Observation<T>>,
    pub steps: usize,
}

fn observe<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    state: &SpectralState<T>,
    t: T,
) -> Result<Observation<T>> {
    Ok(Observation {
        t,
        energy: discrete_energy(problem, grid, state)?,
        h1: grid.hs_norm(&state.q, T::one()),
        l2: grid.hs_norm(&state.p, T::zero()),
    })
}

/// Integrates from `init` to `init.t + t_final` with step `h`.
///
/// Observations are taken at step 0, every `observe_every` steps and at the
/// final step. A non-finite coefficient aborts the run with the offending step.
pub fn integrate<T: Scalar, P: Problem<T> + ?Sized>(
    method: MethodTag,
    problem: &P,
    grid: &Grid<T>,
    init: &SpectralState<T>,
    h: T,
    t_final: T,
    observe_every: usize,
) -> Result<Trajectory<T>> {
    check_step(h)?;
    check_len(grid, init)?;
    if observe_every == 0 {
        return Err(Error::InvalidConfig(
            "observe_every must be positive".into(),
        ));
    }
    let steps = step_count(h, t_final)?;
    let sym = StepSymbols::new(grid, h);
    let time_at = |n: usize| init.t + T::of_usize(n) * h;
    let wants = |n: usize| n.is_multiple_of(observe_every) || n == steps;

    let mut observations = vec![observe(problem, grid, init, init.t)?];
    let mut record = |n: usize, state: &SpectralState<T>| -> Result<()> {
        if !state.is_finite() {
            return Err(Error::NonFinite {
                step: n,
                t: time_at(n).to_f64_lossy(),
            });
        }
        if wants(n) {
            observations.push(observe(problem, grid, state, time_at(n))?);
        }
        Ok(())
    };

    let final_state = match method {
        MethodTag::Slr => {
            let mut older = init.clone();
            let mut middle = lr23_map(problem, grid, &sym, init)?;
            record(1, &middle)?;
            for n in 2..=steps {
                let next = two_step_map(problem, grid, &sym, &older, &middle)?;
                older = std::mem::replace(&mut middle, next);
                record(n, &middle)?;
            }
            middle
        }
        MethodTag::Lr23 | MethodTag::Ti => {
            let mut state = init.clone();
            for n in 1..=steps {
                state = if method == MethodTag::Lr23 {
                    lr23_map(problem, grid, &sym, &state)?
                } else {
                    ti_map(problem, grid, &sym, &state)?
                };
                record(n, &state)?;
            }
            state
        }
    };
    Ok(Trajectory {
        final_state,
        observations,
        steps,
    })
}
