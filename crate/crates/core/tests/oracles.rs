//! Checks against independently computed values: extended-precision series,
//! direct grid quadrature, a naive DFT with RK4 time stepping, and
//! hand-written backward relations.

use std::f64::consts::PI;

use kglr_core::experiments::{
    energy_series, reference_solution, relative_err, run_convergence, ExperimentConfig,
    ExperimentKind, RunOptions,
};
use kglr_core::integrators::{integrate, lr23_step, slr_start, slr_step, slr_step_back};
use kglr_core::problem::{discrete_energy, linear_flow, rough_initial_data};
use kglr_core::spectral::{start_kernel, START_TAYLOR_SWITCH};
use kglr_core::{
    CoeffVector, Complex, Grid, MethodTag, Nonlinearity, ProblemSpec, SpectralState, TwoStepState,
};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

type C = Complex<f64>;

/// `sum_m (-1)^m 2(m+1) x^(2m) / (2m+3)!` evaluated exactly in rationals.
fn start_kernel_rational(x: &BigRational, terms: usize) -> f64 {
    let mut sum = BigRational::zero();
    let mut power = BigRational::one();
    let mut factorial = BigInt::from(6);
    for m in 0..terms {
        let coeff = BigRational::new(BigInt::from(2 * (m + 1)), factorial.clone());
        let term = coeff * &power;
        if m % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power = power * x * x;
        factorial *= BigInt::from((2 * m + 4) * (2 * m + 5));
    }
    sum.to_f64().unwrap()
}

#[test]
fn start_kernel_matches_extended_precision_series() {
    for (num, den) in [(1i64, 1000i64), (1, 100), (1, 20), (1, 10), (1, 2), (3, 2)] {
        let x = BigRational::new(BigInt::from(num), BigInt::from(den));
        let exact = start_kernel_rational(&x, 20);
        let x = num as f64 / den as f64;
        let got = start_kernel(x);
        // the quotient form loses about eps / x^2 to cancellation
        let tol = if x < START_TAYLOR_SWITCH {
            1e-15
        } else {
            1e-16 / (x * x)
        };
        assert!(
            (got - exact).abs() <= tol,
            "g({num}/{den}) = {got}, series {exact}"
        );
    }
    assert!((start_kernel_rational(&BigRational::zero(), 3) - 1.0 / 3.0).abs() < 1e-17);
}

/// `J0(z) = sum_k (-1)^k (z/2)^(2k) / (k!)^2`.
fn bessel_j0(z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= -(z / 2.0) * (z / 2.0) / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

fn cosine_state(grid: &Grid<f64>, c: f64) -> SpectralState<f64> {
    let mut q = CoeffVector::zeros(grid.len());
    q.set(1, C::new(c, 0.0));
    q.set(-1, C::new(c, 0.0));
    SpectralState::new(q, CoeffVector::zeros(grid.len()), 0.0)
}

#[test]
fn energy_of_a_cosine_matches_direct_quadrature() {
    let rho = 0.5;
    let m = 16;
    let grid = Grid::new(m, rho).unwrap();
    let c = 0.3;
    let state = cosine_state(&grid, c);

    // u = 2c cos x, u_x = -2c sin x, v = 0 sampled on the 2M points
    let n = 2 * m;
    let mut cubic = 0.0;
    let mut sine = 0.0;
    for k in 0..n {
        let x = (k as f64 - m as f64) * PI / m as f64;
        let (u, ux) = (2.0 * c * x.cos(), -2.0 * c * x.sin());
        let quadratic = 0.5 * (ux * ux + rho * u * u);
        cubic += quadratic + u.powi(4) / 4.0;
        sine += quadratic + 1.0 + u.cos();
    }
    let (cubic, sine) = (cubic / n as f64, sine / n as f64);

    let e_cubic = discrete_energy(
        &ProblemSpec::new(Nonlinearity::CubicDefocusing).with_rho(rho),
        &grid,
        &state,
    )
    .unwrap();
    let e_sine = discrete_energy(
        &ProblemSpec::new(Nonlinearity::Sine).with_rho(rho),
        &grid,
        &state,
    )
    .unwrap();
    assert!((e_cubic - cubic).abs() < 1e-14, "{e_cubic} vs {cubic}");
    assert!((e_sine - sine).abs() < 1e-14, "{e_sine} vs {sine}");

    // closed forms: mean of (2c cos x)^4 is 6c^4, mean of cos(2c cos x) is J0(2c)
    let quadratic = (1.0 + rho) * c * c;
    assert!((e_cubic - (quadratic + 1.5 * c.powi(4))).abs() < 1e-14);
    assert!((e_sine - (quadratic + 1.0 + bessel_j0(2.0 * c))).abs() < 1e-14);
}

#[test]
fn linear_flow_conserves_energy() {
    let spec = ProblemSpec::new(Nonlinearity::Linear)
        .with_theta(1.5)
        .with_rho(0.3);
    let grid = spec.grid(64).unwrap();
    let init = rough_initial_data(&spec, &grid).unwrap();
    let e0 = discrete_energy(&spec, &grid, &init).unwrap();
    for t in [0.1f64, 1.0, 7.3, -4.0, 100.0] {
        let e = discrete_energy(&spec, &grid, &linear_flow(&grid, &init, t)).unwrap();
        assert!((e - e0).abs() <= 1e-12 * e0, "t = {t}: {e} vs {e0}");
    }
}

#[test]
fn sobolev_norms_of_rough_data_grow_only_above_the_regularity() {
    let theta = 1.5;
    let norms = |s: f64| -> Vec<f64> {
        [32, 64, 128]
            .into_iter()
            .map(|m| {
                let spec = ProblemSpec::new(Nonlinearity::Sine)
                    .with_theta(theta)
                    .with_seed(3);
                let grid = spec.grid(m).unwrap();
                let data = rough_initial_data(&spec, &grid).unwrap();
                grid.hs_norm(&data.q, s)
            })
            .collect()
    };
    // q lies in H^theta: bounded for 1 + s' < theta, unbounded beyond.
    let below = norms(theta - 0.25);
    let above = norms(theta + 0.25);
    for w in below.windows(2) {
        assert!(w[1] / w[0] < 1.08, "below the regularity: {below:?}");
    }
    for w in above.windows(2) {
        assert!(w[1] / w[0] > 1.12, "above the regularity: {above:?}");
    }
}

/// Coefficients `c_j = (1/2M) sum_k w_k e^{-ijx_k}` by direct summation.
struct NaiveDft {
    m: usize,
    points: Vec<f64>,
}

impl NaiveDft {
    fn new(m: usize) -> Self {
        let points = (0..2 * m)
            .map(|k| (k as f64 - m as f64) * PI / m as f64)
            .collect();
        NaiveDft { m, points }
    }

    fn mode(&self, i: usize) -> f64 {
        i as f64 - self.m as f64
    }

    fn forward(&self, values: &[f64]) -> Vec<C> {
        let n = 2 * self.m;
        (0..n)
            .map(|i| {
                let j = self.mode(i);
                self.points
                    .iter()
                    .zip(values)
                    .map(|(&x, &w)| C::from_polar(w, -j * x))
                    .sum::<C>()
                    / n as f64
            })
            .collect()
    }

    fn inverse(&self, coeffs: &[C]) -> Vec<f64> {
        self.points
            .iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c * C::from_polar(1.0, self.mode(i) * x)).re)
                    .sum()
            })
            .collect()
    }

    /// Transform of `sin(u)`.
    fn sine_term(&self, q: &[C]) -> Vec<C> {
        let u: Vec<f64> = self.inverse(q).into_iter().map(f64::sin).collect();
        self.forward(&u)
    }
}

/// Classical RK4 for `q' = p`, `p' = -omega^2 q + F sin(F^-1 q)`.
fn rk4(
    dft: &NaiveDft,
    omega: &[f64],
    q: &[C],
    p: &[C],
    t: f64,
    substeps: usize,
) -> (Vec<C>, Vec<C>) {
    let dt = t / substeps as f64;
    let rhs = |q: &[C], p: &[C]| -> (Vec<C>, Vec<C>) {
        let f = dft.sine_term(q);
        let dp = q
            .iter()
            .zip(&f)
            .zip(omega)
            .map(|((q, f), w)| f - q * (w * w))
            .collect();
        (p.to_vec(), dp)
    };
    let axpy =
        |y: &[C], k: &[C], a: f64| -> Vec<C> { y.iter().zip(k).map(|(y, k)| y + k * a).collect() };
    let (mut q, mut p) = (q.to_vec(), p.to_vec());
    for _ in 0..substeps {
        let (k1q, k1p) = rhs(&q, &p);
        let (k2q, k2p) = rhs(&axpy(&q, &k1q, dt / 2.0), &axpy(&p, &k1p, dt / 2.0));
        let (k3q, k3p) = rhs(&axpy(&q, &k2q, dt / 2.0), &axpy(&p, &k2p, dt / 2.0));
        let (k4q, k4p) = rhs(&axpy(&q, &k3q, dt), &axpy(&p, &k3p, dt));
        for i in 0..q.len() {
            q[i] += (k1q[i] + k2q[i] * 2.0 + k3q[i] * 2.0 + k4q[i]) * (dt / 6.0);
            p[i] += (k1p[i] + k2p[i] * 2.0 + k3p[i] * 2.0 + k4p[i]) * (dt / 6.0);
        }
    }
    (q, p)
}

/// Absolute `H1 x L2` distance computed with the oracle's own frequencies.
fn energy_distance(omega: &[f64], a: (&[C], &[C]), b: (&[C], &[C])) -> f64 {
    let dq: f64 = (0..omega.len())
        .map(|i| omega[i].powi(2) * (a.0[i] - b.0[i]).norm_sqr())
        .sum();
    let dp: f64 = (0..omega.len()).map(|i| (a.1[i] - b.1[i]).norm_sqr()).sum();
    dq.sqrt() + dp.sqrt()
}

#[test]
fn lr23_local_error_is_third_order() {
    let m = 16;
    let spec = ProblemSpec::new(Nonlinearity::Sine).with_theta(10.0);
    let grid = spec.grid(m).unwrap();
    let init = rough_initial_data(&spec, &grid).unwrap();
    let dft = NaiveDft::new(m);
    let omega: Vec<f64> = (0..2 * m).map(|i| dft.mode(i).abs()).collect();

    let local_error = |h: f64| {
        let step = lr23_step(&spec, &grid, &init, h).unwrap();
        let exact = rk4(&dft, &omega, init.q.as_slice(), init.p.as_slice(), h, 50);
        energy_distance(
            &omega,
            (step.q.as_slice(), step.p.as_slice()),
            (&exact.0, &exact.1),
        )
    };
    let h = 1e-3;
    let ratio = local_error(h) / local_error(h / 2.0);
    assert!((7.0..=9.0).contains(&ratio), "err(h)/err(h/2) = {ratio}");
}

#[test]
fn slr_step_satisfies_the_backward_relations() {
    let m = 16;
    let rho = 0.25;
    let spec = ProblemSpec::new(Nonlinearity::Sine)
        .with_theta(1.5)
        .with_rho(rho)
        .with_seed(9);
    let grid = spec.grid(m).unwrap();
    let init = rough_initial_data(&spec, &grid).unwrap();
    let h = 0.07;
    let mut ts = slr_start(&spec, &grid, &init, h).unwrap();
    for _ in 0..5 {
        ts = slr_step(&spec, &grid, &ts).unwrap();
    }
    let (older, middle) = (ts.prev.clone(), ts.curr.clone());
    let next = slr_step(&spec, &grid, &ts).unwrap();
    assert_eq!(next.prev, middle);
    let newer = &next.curr;

    let dft = NaiveDft::new(m);
    let f = dft.sine_term(middle.q.as_slice());
    let mut q_back = Vec::new();
    let mut p_back = Vec::new();
    for (i, fi) in f.iter().enumerate() {
        let w = (dft.mode(i).powi(2) + rho).sqrt();
        let x = h * w;
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        let (un, vn) = (middle.q.as_slice()[i], newer.q.as_slice()[i]);
        q_back.push(un * (2.0 * x.cos()) - vn + fi * (h * h * sinc));
        p_back.push(
            newer.p.as_slice()[i] + un * (2.0 * h * w * w * sinc) - fi * (h * (x.cos() + sinc)),
        );
    }
    let rel = |a: &[C], b: &[C]| {
        let num: f64 = a.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = b.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    };
    assert!(rel(&q_back, older.q.as_slice()) <= 1e-13);
    assert!(rel(&p_back, older.p.as_slice()) <= 1e-13);

    let back = slr_step_back(&spec, &grid, &next).unwrap();
    assert!(rel(back.prev.q.as_slice(), older.q.as_slice()) <= 1e-13);
    assert!(rel(back.prev.p.as_slice(), older.p.as_slice()) <= 1e-13);
    let _: &TwoStepState<f64> = &back;
}

#[test]
fn smooth_slr_run_nearly_conserves_energy() {
    let spec = ProblemSpec::new(Nonlinearity::Sine).with_theta(10.0);
    let grid = spec.grid(64).unwrap();
    let init = rough_initial_data(&spec, &grid).unwrap();
    let traj = integrate(MethodTag::Slr, &spec, &grid, &init, 1e-2, 1.0, 1).unwrap();
    let drift = energy_series(&traj)
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max);
    assert!(drift < 1e-4, "max relative drift {drift}");
}

#[test]
fn halving_the_reference_step_is_negligible() {
    let mut cfg = ExperimentConfig::new(
        ExperimentKind::Convergence,
        32,
        1.5,
        MethodTag::ALL.to_vec(),
        (4..=7).map(|k| 0.5f64.powi(k)).collect(),
        1.0,
    );
    cfg.h_ref = Some(0.5f64.powi(10));
    let records = run_convergence(&cfg, &RunOptions::default()).unwrap();
    let smallest = records.iter().map(|r| r.err).fold(f64::INFINITY, f64::min);

    let (spec, grid, init) = cfg.setup().unwrap();
    let coarse = reference_solution(&spec, &grid, &init, 1.0, 0.5f64.powi(10), None).unwrap();
    let fine = reference_solution(&spec, &grid, &init, 1.0, 0.5f64.powi(11), None).unwrap();
    let change = relative_err(&coarse, &fine, &grid).unwrap();
    assert!(
        change < 0.1 * smallest,
        "reference moved {change}, smallest error {smallest}"
    );
}
