//! Experiment harness: convergence-order sweeps, efficiency timing, long-time
//! energy drift and the reversibility check of the two-step scheme.
//!
//! Sweeps run in double precision. Independent sweep points may run in
//! parallel (see [`RunOptions::jobs`]); results are always returned in
//! configuration order, so output does not depend on scheduling. Timing runs
//! are sequential.

pub mod cache;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{
    integrate, slr_start, slr_step, slr_step_back, step_count, MethodTag, Trajectory,
};
use crate::problem::{
    rough_initial_data, CountingProblem, Nonlinearity, Problem, ProblemSpec, SpectralState,
};
use crate::scalar::Scalar;
use crate::spectral::Grid;

pub use cache::{CacheKey, ReferenceCache};

/// Reference step as a fraction of the smallest sweep step when none is given.
pub const DEFAULT_REFERENCE_DIVISOR: f64 = 8.0;
/// Timed repetitions per efficiency point; the median is reported.
pub const TIMING_REPETITIONS: usize = 3;
/// Default bound on second-half / first-half maximum drift.
pub const DEFAULT_DRIFT_RATIO: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Convergence,
    Efficiency,
    EnergyDrift,
    Reversibility,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Efficiency => "efficiency",
            ExperimentKind::EnergyDrift => "energy-drift",
            ExperimentKind::Reversibility => "reversibility",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "convergence" => Ok(ExperimentKind::Convergence),
            "efficiency" => Ok(ExperimentKind::Efficiency),
            "energy-drift" | "energydrift" => Ok(ExperimentKind::EnergyDrift),
            "reversibility" => Ok(ExperimentKind::Reversibility),
            other => Err(format!("unknown experiment kind `{other}`")),
        }
    }
}

/// Declarative description of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// `M`; the grid has `2M` points.
    pub half_modes: usize,
    pub theta: f64,
    pub rho: f64,
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
    pub methods: Vec<MethodTag>,
    pub step_sizes: Vec<f64>,
    pub t_final: f64,
    pub data_scale: f64,
    /// Reference step; defaults to the smallest step divided by
    /// [`DEFAULT_REFERENCE_DIVISOR`].
    pub h_ref: Option<f64>,
    pub observe_every: usize,
    /// Bound on the ratio of second-half to first-half maximum energy drift
    /// for a method to count as drift-free.
    pub drift_ratio: f64,
}

impl ExperimentConfig {
    /// Configuration with the documented defaults for every optional field.
    pub fn new(
        kind: ExperimentKind,
        half_modes: usize,
        theta: f64,
        methods: Vec<MethodTag>,
        step_sizes: Vec<f64>,
        t_final: f64,
    ) -> Self {
        ExperimentConfig {
            kind,
            half_modes,
            theta,
            rho: 0.0,
            nonlinearity: Nonlinearity::Sine,
            seed: 0,
            methods,
            step_sizes,
            t_final,
            data_scale: 1.0,
            h_ref: None,
            observe_every: 1,
            drift_ratio: DEFAULT_DRIFT_RATIO,
        }
    }

    pub fn problem_spec(&self) -> ProblemSpec<f64> {
        ProblemSpec {
            rho: self.rho,
            nonlinearity: self.nonlinearity,
            theta: self.theta,
            data_scale: self.data_scale,
            seed: self.seed,
        }
    }

    pub fn min_step(&self) -> f64 {
        self.step_sizes
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn effective_h_ref(&self) -> f64 {
        self.h_ref
            .unwrap_or_else(|| self.min_step() / DEFAULT_REFERENCE_DIVISOR)
    }

    /// Step sizes sorted from coarse to fine without duplicates.
    pub fn sorted_steps(&self) -> Vec<f64> {
        let mut steps = self.step_sizes.clone();
        steps.sort_by(|a, b| b.total_cmp(a));
        steps.dedup();
        steps
    }

    /// Checks every invariant; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::InvalidConfig(format!("{key}: {msg}")));
        if self.half_modes < 2 {
            return bad("M", format!("must be at least 2, got {}", self.half_modes));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return bad("theta", format!("must be positive, got {}", self.theta));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return bad("rho", format!("must be nonnegative, got {}", self.rho));
        }
        if !(self.data_scale > 0.0) || !self.data_scale.is_finite() {
            return bad(
                "data_scale",
                format!("must be positive, got {}", self.data_scale),
            );
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad("T_final", format!("must be positive, got {}", self.t_final));
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        if self.step_sizes.is_empty() {
            return bad("step_sizes", "at least one step size is required".into());
        }
        for &h in &self.step_sizes {
            if !(h > 0.0 && h < 1.0) {
                return bad("step_sizes", format!("{h} outside (0, 1)"));
            }
            if step_count(h, self.t_final).is_err() {
                return bad(
                    "step_sizes",
                    format!("{h} does not divide T_final = {}", self.t_final),
                );
            }
        }
        if let Some(h_ref) = self.h_ref {
            if !(h_ref > 0.0) || h_ref >= self.min_step() / 4.0 {
                return bad(
                    "h_ref",
                    format!(
                        "{h_ref} must be below a quarter of the smallest step {}",
                        self.min_step()
                    ),
                );
            }
        }
        if matches!(
            self.kind,
            ExperimentKind::Convergence | ExperimentKind::Efficiency
        ) && step_count(self.effective_h_ref(), self.t_final).is_err()
        {
            return bad(
                "h_ref",
                format!(
                    "{} does not divide T_final = {}",
                    self.effective_h_ref(),
                    self.t_final
                ),
            );
        }
        if self.observe_every == 0 {
            return bad("observe_every", "must be positive".into());
        }
        if !(self.drift_ratio > 0.0) || !self.drift_ratio.is_finite() {
            return bad(
                "drift_ratio",
                format!("must be positive, got {}", self.drift_ratio),
            );
        }
        Ok(())
    }

    /// Grid, problem and seeded initial data described by this config.
    pub fn setup(&self) -> Result<(ProblemSpec<f64>, Grid<f64>, SpectralState<f64>)> {
        self.validate()?;
        let spec = self.problem_spec();
        let grid = spec.grid(self.half_modes)?;
        let init = rough_initial_data(&spec, &grid)?;
        Ok((spec, grid, init))
    }
}

/// Execution settings that do not change results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for independent sweep points; `0` or `1` runs serially.
    pub jobs: usize,
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    fn cache(&self) -> Option<ReferenceCache> {
        self.cache_dir.as_ref().map(ReferenceCache::new)
    }

    fn run_parallel<I, O, F>(&self, items: Vec<I>, func: F) -> Vec<O>
    where
        I: Send,
        O: Send,
        F: Fn(I) -> O + Send + Sync,
    {
        if self.jobs <= 1 {
            return items.into_iter().map(func).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
        {
            Ok(pool) => pool.install(|| items.into_par_iter().map(&func).collect()),
            Err(_) => items.into_iter().map(func).collect(),
        }
    }
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: MethodTag,
    pub h: f64,
    /// Global error for convergence/efficiency, maximum relative drift for
    /// energy runs, recovery defect for reversibility runs. `NaN` if aborted.
    pub err: f64,
    pub wall_seconds: f64,
    /// Slope against the next coarser step of the same method.
    pub estimated_order: Option<f64>,
    /// `(t, |H(t) - H(0)| / |H(0)|)` for energy runs.
    pub energy_series: Option<Vec<(f64, f64)>>,
    /// Spectral nonlinearity evaluations in the stepping loop.
    pub f_evals: u64,
    pub steps: usize,
    /// Diagnostic when the run did not complete.
    pub aborted: Option<String>,
}

impl RunRecord {
    fn new(method: MethodTag, h: f64) -> Self {
        RunRecord {
            method,
            h,
            err: f64::NAN,
            wall_seconds: 0.0,
            estimated_order: None,
            energy_series: None,
            f_evals: 0,
            steps: 0,
            aborted: None,
        }
    }

    fn abort(mut self, err: Error) -> Self {
        self.aborted = Some(err.to_string());
        self.err = f64::NAN;
        self
    }

    /// Whether the run completed with finite results.
    pub fn is_ok(&self) -> bool {
        self.aborted.is_none() && self.err.is_finite() && self.wall_seconds.is_finite()
    }
}

fn relative_part<T: Scalar>(diff: T, reference: T, what: &'static str) -> Result<T> {
    if reference > T::zero() {
        Ok(diff / reference)
    } else {
        Err(Error::ZeroReference(what))
    }
}

/// `|q - q_ref|_H1 / |q_ref|_H1 + |p - p_ref|_L2 / |p_ref|_L2`.
pub fn relative_err<T: Scalar>(
    num: &SpectralState<T>,
    reference: &SpectralState<T>,
    grid: &Grid<T>,
) -> Result<T> {
    let dq = grid.hs_norm(&num.q.sub(&reference.q), T::one());
    let dp = grid.hs_norm(&num.p.sub(&reference.p), T::zero());
    let rq = grid.hs_norm(&reference.q, T::one());
    let rp = grid.hs_norm(&reference.p, T::zero());
    Ok(relative_part(dq, rq, "H1")? + relative_part(dp, rp, "L2")?)
}

/// Like [`relative_err`], but a zero reference component contributes its
/// absolute difference instead of failing.
fn recovery_defect<T: Scalar>(
    num: &SpectralState<T>,
    reference: &SpectralState<T>,
    grid: &Grid<T>,
) -> T {
    let part = |diff: T, r: T| if r > T::zero() { diff / r } else { diff };
    part(
        grid.hs_norm(&num.q.sub(&reference.q), T::one()),
        grid.hs_norm(&reference.q, T::one()),
    ) + part(
        grid.hs_norm(&num.p.sub(&reference.p), T::zero()),
        grid.hs_norm(&reference.p, T::zero()),
    )
}

/// Pairwise slopes `log(err_i / err_{i+1}) / log(h_i / h_{i+1})`.
pub fn estimate_order(errs: &[(f64, f64)]) -> Result<Vec<f64>> {
    for &(h, e) in errs {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidErrorSeries(format!("error {e} at h = {h}")));
        }
    }
    errs.windows(2)
        .map(|w| {
            let ((h0, e0), (h1, e1)) = (w[0], w[1]);
            if !(h1 < h0) || !(h1 > 0.0) {
                return Err(Error::InvalidErrorSeries(format!(
                    "h = {h0} followed by {h1}"
                )));
            }
            Ok((e0 / e1).ln() / (h0 / h1).ln())
        })
        .collect()
}

/// SLR trajectory at step `h_ref` evaluated at `init.t + t_final`, read from
/// or written to `cache` when one is given.
pub fn reference_solution(
    spec: &ProblemSpec<f64>,
    grid: &Grid<f64>,
    init: &SpectralState<f64>,
    t_final: f64,
    h_ref: f64,
    cache: Option<&ReferenceCache>,
) -> Result<SpectralState<f64>> {
    let key = CacheKey::new(spec, init, t_final, h_ref);
    if let Some(cache) = cache {
        if let Some(state) = cache.load(&key)? {
            return Ok(state);
        }
    }
    let traj = integrate(MethodTag::Slr, spec, grid, init, h_ref, t_final, usize::MAX)?;
    if let Some(cache) = cache {
        cache.store(&key, &traj.final_state)?;
    }
    Ok(traj.final_state)
}

fn timed_run(
    method: MethodTag,
    spec: &ProblemSpec<f64>,
    grid: &Grid<f64>,
    init: &SpectralState<f64>,
    h: f64,
    t_final: f64,
    observe_every: usize,
) -> (Result<Trajectory<f64>>, f64, u64) {
    let counted = CountingProblem::new(*spec);
    let start = Instant::now();
    let traj = integrate(method, &counted, grid, init, h, t_final, observe_every);
    (traj, start.elapsed().as_secs_f64(), counted.f_evals())
}

fn attach_orders(records: &mut [RunRecord]) {
    for i in 1..records.len() {
        let (a, b) = (&records[i - 1], &records[i]);
        if a.method != b.method || !a.is_ok() || !b.is_ok() {
            continue;
        }
        if let Ok(orders) = estimate_order(&[(a.h, a.err), (b.h, b.err)]) {
            records[i].estimated_order = orders.first().copied();
        }
    }
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<(MethodTag, f64)> {
    let steps = cfg.sorted_steps();
    cfg.methods
        .iter()
        .flat_map(|&m| steps.iter().map(move |&h| (m, h)))
        .collect()
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "kind: expected {kind}, got {}",
            cfg.kind
        )));
    }
    Ok(())
}

/// Global error at `T_final` for every method and step, with estimated
/// orders between consecutive steps. Aborted runs are recorded, not fatal.
pub fn run_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    expect_kind(cfg, ExperimentKind::Convergence)?;
    let (spec, grid, init) = cfg.setup()?;
    let cache = opts.cache();
    let reference = reference_solution(
        &spec,
        &grid,
        &init,
        cfg.t_final,
        cfg.effective_h_ref(),
        cache.as_ref(),
    )?;
    let mut records = opts.run_parallel(sweep_points(cfg), |(method, h)| {
        let record = RunRecord::new(method, h);
        let (traj, wall, f_evals) =
            timed_run(method, &spec, &grid, &init, h, cfg.t_final, usize::MAX);
        match traj.and_then(|t| Ok((relative_err(&t.final_state, &reference, &grid)?, t.steps))) {
            Ok((err, steps)) => RunRecord {
                err,
                wall_seconds: wall,
                f_evals,
                steps,
                ..record
            },
            Err(e) => record.abort(e),
        }
    });
    attach_orders(&mut records);
    Ok(records)
}

/// Like [`run_convergence`], additionally timing the stepping loop: one
/// discarded warm-up run, then the median of [`TIMING_REPETITIONS`] runs.
/// Always sequential.
pub fn run_efficiency(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    expect_kind(cfg, ExperimentKind::Efficiency)?;
    let (spec, grid, init) = cfg.setup()?;
    let cache = opts.cache();
    let reference = reference_solution(
        &spec,
        &grid,
        &init,
        cfg.t_final,
        cfg.effective_h_ref(),
        cache.as_ref(),
    )?;
    let mut records = Vec::new();
    for (method, h) in sweep_points(cfg) {
        let record = RunRecord::new(method, h);
        let (warmup, _, _) = timed_run(method, &spec, &grid, &init, h, cfg.t_final, usize::MAX);
        let traj = match warmup {
            Ok(t) => t,
            Err(e) => {
                records.push(record.abort(e));
                continue;
            }
        };
        let mut times = Vec::with_capacity(TIMING_REPETITIONS);
        let mut f_evals = 0;
        for _ in 0..TIMING_REPETITIONS {
            let (run, wall, evals) =
                timed_run(method, &spec, &grid, &init, h, cfg.t_final, usize::MAX);
            if run.is_ok() {
                times.push(wall);
                f_evals = evals;
            }
        }
        times.sort_by(f64::total_cmp);
        let record = match relative_err(&traj.final_state, &reference, &grid) {
            Ok(err) if !times.is_empty() => RunRecord {
                err,
                wall_seconds: times[times.len() / 2],
                f_evals,
                steps: traj.steps,
                ..record
            },
            Ok(_) => record.abort(Error::InvalidConfig("timed runs failed".into())),
            Err(e) => record.abort(e),
        };
        records.push(record);
    }
    attach_orders(&mut records);
    Ok(records)
}

/// Relative energy deviation `|H(t) - H(0)| / |H(0)|` along a trajectory.
pub fn energy_series<T: Scalar>(traj: &Trajectory<T>) -> Vec<(T, T)> {
    let Some(first) = traj.observations.first() else {
        return Vec::new();
    };
    let h0 = first.energy;
    let scale = if h0 != T::zero() {
        Float::abs(h0)
    } else {
        T::one()
    };
    traj.observations
        .iter()
        .map(|o| (o.t, Float::abs(o.energy - h0) / scale))
        .collect()
}

/// Maximum drift over `(t0, t0 + span/2]` and over `(t0 + span/2, t0 + span]`,
/// where `t0` is the first sample time.
pub fn drift_halves(series: &[(f64, f64)], span: f64) -> (f64, f64) {
    let t0 = series.first().map_or(0.0, |s| s.0);
    let mid = t0 + span / 2.0;
    series
        .iter()
        .skip(1)
        .fold((0.0f64, 0.0f64), |(first, second), &(t, d)| {
            if t <= mid {
                (first.max(d), second)
            } else {
                (first, second.max(d))
            }
        })
}

/// Energy drift series for every method and step.
pub fn run_energy_drift(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    expect_kind(cfg, ExperimentKind::EnergyDrift)?;
    let (spec, grid, init) = cfg.setup()?;
    Ok(opts.run_parallel(sweep_points(cfg), |(method, h)| {
        let record = RunRecord::new(method, h);
        let (traj, wall, f_evals) = timed_run(
            method,
            &spec,
            &grid,
            &init,
            h,
            cfg.t_final,
            cfg.observe_every,
        );
        match traj {
            Ok(traj) => {
                let series = energy_series(&traj);
                let err = series.iter().map(|s| s.1).fold(0.0, f64::max);
                RunRecord {
                    err,
                    wall_seconds: wall,
                    f_evals,
                    steps: traj.steps,
                    energy_series: Some(series),
                    ..record
                }
            }
            Err(e) => record.abort(e),
        }
    }))
}

/// Whether a drift series stays bounded: the second-half maximum is at most
/// `ratio` times the first-half maximum.
pub fn drift_is_bounded(series: &[(f64, f64)], span: f64, ratio: f64) -> bool {
    let (first, second) = drift_halves(series, span);
    second <= ratio * first
}

/// Runs the two-step scheme forward `n_steps` steps past its starting window,
/// then the backward recursion `n_steps` times, and returns the relative
/// `H1 x L2` distance of the recovered initial state from `init`.
pub fn reversibility_check<T: Scalar, P: Problem<T> + ?Sized>(
    problem: &P,
    grid: &Grid<T>,
    init: &SpectralState<T>,
    h: T,
    n_steps: usize,
) -> Result<T> {
    if n_steps == 0 {
        return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
    }
    let mut ts = slr_start(problem, grid, init, h)?;
    for _ in 0..n_steps {
        ts = slr_step(problem, grid, &ts)?;
    }
    for _ in 0..n_steps {
        ts = slr_step_back(problem, grid, &ts)?;
    }
    Ok(recovery_defect(&ts.prev, init, grid))
}

/// Reversibility defect of the SLR scheme for each configured step, with
/// `round(T_final / h)` forward steps.
pub fn run_reversibility(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    expect_kind(cfg, ExperimentKind::Reversibility)?;
    let (spec, grid, init) = cfg.setup()?;
    Ok(opts.run_parallel(cfg.sorted_steps(), |h| {
        let record = RunRecord::new(MethodTag::Slr, h);
        let n = match step_count(h, cfg.t_final) {
            Ok(n) => n,
            Err(e) => return record.abort(e),
        };
        let counted = CountingProblem::new(spec);
        let start = Instant::now();
        match reversibility_check(&counted, &grid, &init, h, n) {
            Ok(defect) => RunRecord {
                err: defect,
                wall_seconds: start.elapsed().as_secs_f64(),
                f_evals: counted.f_evals(),
                steps: n,
                ..record
            },
            Err(e) => record.abort(e),
        }
    }))
}

/// Dispatches on `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    match cfg.kind {
        ExperimentKind::Convergence => run_convergence(cfg, opts),
        ExperimentKind::Efficiency => run_efficiency(cfg, opts),
        ExperimentKind::EnergyDrift => run_energy_drift(cfg, opts),
        ExperimentKind::Reversibility => run_reversibility(cfg, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::linear_flow;

    fn dyadic(from: i32, to: i32) -> Vec<f64> {
        (from..=to).map(|k| 0.5f64.powi(k)).collect()
    }

    #[test]
    fn estimate_order_examples() {
        assert!((estimate_order(&[(0.1, 1e-2), (0.05, 2.5e-3)]).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((estimate_order(&[(0.1, 1e-2), (0.05, 5e-3)]).unwrap()[0] - 1.0).abs() < 1e-12);
        assert_eq!(
            estimate_order(&[(0.1, 1e-2), (0.05, 1e-2)]).unwrap(),
            vec![0.0]
        );
        assert!(estimate_order(&[(0.1, 0.0), (0.05, 1e-2)]).is_err());
        assert!(estimate_order(&[(0.05, 1e-2), (0.1, 1e-3)]).is_err());
    }

    #[test]
    fn relative_err_examples() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            8,
            2.0,
            vec![MethodTag::Slr],
            vec![0.1],
            1.0,
        );
        let (_, grid, init) = cfg.setup().unwrap();
        assert_eq!(relative_err(&init, &init, &grid).unwrap(), 0.0);
        let doubled = init.scaled(2.0);
        assert!((relative_err(&doubled, &init, &grid).unwrap() - 2.0).abs() < 1e-14);
        let a = relative_err(&doubled, &init, &grid).unwrap();
        let b = relative_err(&doubled.scaled(-3.5), &init.scaled(-3.5), &grid).unwrap();
        assert!((a - b).abs() < 1e-14);
        let zero = SpectralState::zeros(grid.len());
        assert!(matches!(
            relative_err(&init, &zero, &grid),
            Err(Error::ZeroReference(_))
        ));
    }

    #[test]
    fn config_validation_names_the_key() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            16,
            2.0,
            vec![MethodTag::Slr],
            vec![0.3],
            1.0,
        );
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("step_sizes"), "{msg}");
        cfg.step_sizes = vec![0.1, 0.05];
        cfg.validate().unwrap();
        cfg.h_ref = Some(0.02);
        assert!(cfg.validate().unwrap_err().to_string().contains("h_ref"));
        cfg.h_ref = Some(0.005);
        cfg.validate().unwrap();
        cfg.half_modes = 1;
        assert!(cfg.validate().unwrap_err().to_string().contains("M"));
    }

    #[test]
    fn reference_of_linear_problem_is_the_exact_flow() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            16,
            2.0,
            vec![MethodTag::Slr],
            vec![0.1],
            1.0,
        );
        cfg.nonlinearity = Nonlinearity::Linear;
        let (spec, grid, init) = cfg.setup().unwrap();
        let r = reference_solution(&spec, &grid, &init, 1.0, 0.0125, None).unwrap();
        let exact = linear_flow(&grid, &init, 1.0);
        assert!(relative_err(&r, &exact, &grid).unwrap() < 1e-10);
    }

    #[test]
    fn reference_cache_hit_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path());
        let cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            16,
            1.5,
            vec![MethodTag::Slr],
            vec![0.1],
            1.0,
        );
        let (spec, grid, init) = cfg.setup().unwrap();
        let a = reference_solution(&spec, &grid, &init, 1.0, 0.0125, Some(&cache)).unwrap();
        let b = reference_solution(&spec, &grid, &init, 1.0, 0.0125, Some(&cache)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a,
            reference_solution(&spec, &grid, &init, 1.0, 0.0125, None).unwrap()
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn linear_sanity_sweep_has_round_off_errors() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            16,
            2.0,
            MethodTag::ALL.to_vec(),
            dyadic(3, 5),
            1.0,
        );
        cfg.nonlinearity = Nonlinearity::Linear;
        let records = run_convergence(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 9);
        for r in &records {
            assert!(r.err < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn convergence_records_are_ordered_and_parallel_safe() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::Convergence,
            16,
            3.0,
            MethodTag::ALL.to_vec(),
            vec![0.0625, 0.125, 0.25],
            1.0,
        );
        let serial = run_convergence(&cfg, &RunOptions::default()).unwrap();
        let parallel = run_convergence(
            &cfg,
            &RunOptions {
                jobs: 4,
                cache_dir: None,
            },
        )
        .unwrap();
        let key = |rs: &[RunRecord]| {
            rs.iter()
                .map(|r| (r.method, r.h, r.err, r.estimated_order))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&serial), key(&parallel));
        let hs: Vec<f64> = serial.iter().take(3).map(|r| r.h).collect();
        assert_eq!(hs, vec![0.25, 0.125, 0.0625]);
        assert!(serial[0].estimated_order.is_none());
        assert!(serial[1].estimated_order.is_some());
        assert!(serial[3].estimated_order.is_none());
    }

    #[test]
    fn efficiency_counts_evaluations_and_times_increase() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::Efficiency,
            32,
            2.0,
            vec![MethodTag::Slr, MethodTag::Ti],
            dyadic(4, 7),
            1.0,
        );
        let records = run_efficiency(&cfg, &RunOptions::default()).unwrap();
        for method in [MethodTag::Slr, MethodTag::Ti] {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
            for r in &rs {
                assert_eq!(r.f_evals, r.steps as u64 * method.f_evals_per_step());
            }
            for w in rs.windows(2) {
                assert!(w[1].wall_seconds > w[0].wall_seconds, "{method}: {w:?}");
            }
        }
        let again = run_efficiency(&cfg, &RunOptions::default()).unwrap();
        for (a, b) in records.iter().zip(&again) {
            assert_eq!(a.err.to_bits(), b.err.to_bits());
        }
    }

    #[test]
    fn energy_drift_of_linear_problem_is_round_off() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::EnergyDrift,
            16,
            1.5,
            MethodTag::ALL.to_vec(),
            vec![0.1],
            20.0,
        );
        cfg.nonlinearity = Nonlinearity::Linear;
        cfg.data_scale = 0.25;
        for r in run_energy_drift(&cfg, &RunOptions::default()).unwrap() {
            assert!(r.err <= 1e-10, "{r:?}");
            assert_eq!(r.energy_series.as_ref().unwrap().len(), 201);
        }
    }

    #[test]
    fn drift_halves_splits_at_mid_window() {
        let series = vec![(0.0, 0.0), (1.0, 0.1), (2.0, 0.3), (3.0, 0.2), (4.0, 0.25)];
        assert_eq!(drift_halves(&series, 4.0), (0.3, 0.25));
        assert!(drift_is_bounded(&series, 4.0, 2.0));
        assert!(!drift_is_bounded(
            &[(0.0, 0.0), (1.0, 0.1), (2.0, 0.3)],
            2.0,
            2.0
        ));
    }

    #[test]
    fn reversibility_examples() {
        let spec = ProblemSpec::<f64>::new(Nonlinearity::Linear).with_theta(2.0);
        let grid = spec.grid(16).unwrap();
        let init = rough_initial_data(&spec, &grid).unwrap();
        assert!(reversibility_check(&spec, &grid, &init, 0.1, 1).unwrap() <= 1e-13);

        let sine = ProblemSpec::<f64>::new(Nonlinearity::Sine);
        let zero = SpectralState::zeros(grid.len());
        assert_eq!(
            reversibility_check(&sine, &grid, &zero, 0.1, 5).unwrap(),
            0.0
        );
        assert!(reversibility_check(&sine, &grid, &init, 0.1, 0).is_err());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let cfg = ExperimentConfig::new(
            ExperimentKind::EnergyDrift,
            8,
            2.0,
            vec![MethodTag::Slr],
            vec![0.1],
            1.0,
        );
        assert!(run_convergence(&cfg, &RunOptions::default()).is_err());
    }
}
