//! Verb dispatch and CSV layouts.
//!
//! | verb            | file                | columns                                      |
//! |-----------------|---------------------|----------------------------------------------|
//! | `solve`         | `solve.csv`         | method,h,t,energy,h1_norm,l2_norm            |
//! | `convergence`   | `convergence.csv`   | method,h,err,order                           |
//! | `efficiency`    | `efficiency.csv`    | method,h,err,order,wall_seconds,f_evals      |
//! | `energy-drift`  | `energy-drift.csv`  | method,t,rel_drift                           |
//! | `reversibility` | `reversibility.csv` | h,n_steps,defect                             |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kglr_core::experiments::{
    drift_halves, relative_err, reversibility_check, run_convergence, run_efficiency,
    run_energy_drift, run_reversibility, ExperimentConfig, ExperimentKind, RunOptions, RunRecord,
};
use kglr_core::integrators::integrate;
use kglr_core::problem::{linear_flow, rough_initial_data};
use kglr_core::{MethodTag, Nonlinearity, ProblemSpec};
use thiserror::Error;

use crate::config::{parse_config, render_config, ConfigError};
use crate::table::{write_csv_file, Field};

/// Optional directory for cached reference solutions.
pub const CACHE_DIR_VAR: &str = "KGLR_CACHE_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Solve,
    Convergence,
    Efficiency,
    EnergyDrift,
    Reversibility,
    Selftest,
    /// Prints the effective config after overrides; the output parses back
    /// to the same config.
    PrintConfig,
}

impl Verb {
    pub const ALL: [Verb; 7] = [
        Verb::Solve,
        Verb::Convergence,
        Verb::Efficiency,
        Verb::EnergyDrift,
        Verb::Reversibility,
        Verb::Selftest,
        Verb::PrintConfig,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::Convergence => "convergence",
            Verb::Efficiency => "efficiency",
            Verb::EnergyDrift => "energy-drift",
            Verb::Reversibility => "reversibility",
            Verb::Selftest => "selftest",
            Verb::PrintConfig => "print-config",
        }
    }

    fn experiment(self) -> Option<ExperimentKind> {
        match self {
            Verb::Convergence => Some(ExperimentKind::Convergence),
            Verb::Efficiency => Some(ExperimentKind::Efficiency),
            Verb::EnergyDrift => Some(ExperimentKind::EnergyDrift),
            Verb::Reversibility => Some(ExperimentKind::Reversibility),
            _ => None,
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown verb `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliCommand {
    pub verb: Verb,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
}

impl CliCommand {
    pub fn new(verb: Verb, config_path: Option<PathBuf>, output_dir: PathBuf) -> Self {
        CliCommand {
            verb,
            config_path,
            output_dir,
            overrides: Vec::new(),
            jobs: 1,
            seed: None,
            cache_dir: std::env::var_os(CACHE_DIR_VAR).map(PathBuf::from),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Experiment(#[from] kglr_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Outputs were written but some run failed.
    #[error("{0}")]
    RunFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

/// What a successful command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines for standard output.
    pub report: Vec<String>,
}

/// Runs `cmd`, prints its report and returns the process exit code. Failures
/// print one diagnostic line to standard error.
pub fn run_command(cmd: &CliCommand) -> i32 {
    match execute(cmd) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            EXIT_OK
        }
        Err(err) => {
            eprintln!("kglr {}: {}", cmd.verb, err.to_string().replace('\n', " "));
            err.exit_code()
        }
    }
}

/// Loads the config for `cmd`, applying `--set` overrides, `--seed` and the
/// experiment kind implied by the verb.
pub fn load_config(cmd: &CliCommand) -> Result<ExperimentConfig, CliError> {
    let path = cmd
        .config_path
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{}` needs --config <path>", cmd.verb)))?;
    let mut overrides = cmd.overrides.clone();
    if let Some(seed) = cmd.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(kind) = cmd.verb.experiment() {
        overrides.push(format!("kind={kind}"));
    }
    Ok(parse_config(path, &overrides)?)
}

pub fn execute(cmd: &CliCommand) -> Result<Outcome, CliError> {
    if cmd.verb == Verb::Selftest {
        return selftest();
    }
    let cfg = load_config(cmd)?;
    let opts = RunOptions {
        jobs: cmd.jobs,
        cache_dir: cmd.cache_dir.clone(),
    };
    let (file, header, rows, records): (&str, &[&str], Vec<Vec<Field>>, Vec<RunRecord>) =
        match cmd.verb {
            Verb::PrintConfig => {
                return Ok(Outcome {
                    files: Vec::new(),
                    report: render_config(&cfg).lines().map(str::to_string).collect(),
                })
            }
            Verb::Selftest => unreachable!(),
            Verb::Solve => return solve(cmd, &cfg),
            Verb::Convergence => {
                let records = run_convergence(&cfg, &opts)?;
                let rows = records
                    .iter()
                    .map(|r| {
                        vec![
                            r.method.name().into(),
                            r.h.into(),
                            r.err.into(),
                            r.estimated_order.into(),
                        ]
                    })
                    .collect();
                (
                    "convergence.csv",
                    &["method", "h", "err", "order"],
                    rows,
                    records,
                )
            }
            Verb::Efficiency => {
                let records = run_efficiency(&cfg, &opts)?;
                let rows = records
                    .iter()
                    .map(|r| {
                        vec![
                            r.method.name().into(),
                            r.h.into(),
                            r.err.into(),
                            r.estimated_order.into(),
                            r.wall_seconds.into(),
                            r.f_evals.into(),
                        ]
                    })
                    .collect();
                (
                    "efficiency.csv",
                    &["method", "h", "err", "order", "wall_seconds", "f_evals"],
                    rows,
                    records,
                )
            }
            Verb::EnergyDrift => {
                if cfg.step_sizes.len() != 1 {
                    return Err(CliError::Usage(format!(
                        "step_sizes: energy-drift takes exactly one step size, got {}",
                        cfg.step_sizes.len()
                    )));
                }
                let records = run_energy_drift(&cfg, &opts)?;
                let rows = records
                    .iter()
                    .flat_map(|r| {
                        r.energy_series
                            .iter()
                            .flatten()
                            .map(|&(t, d)| vec![r.method.name().into(), t.into(), d.into()])
                    })
                    .collect();
                (
                    "energy-drift.csv",
                    &["method", "t", "rel_drift"],
                    rows,
                    records,
                )
            }
            Verb::Reversibility => {
                let records = run_reversibility(&cfg, &opts)?;
                let rows = records
                    .iter()
                    .map(|r| vec![r.h.into(), r.steps.into(), r.err.into()])
                    .collect();
                (
                    "reversibility.csv",
                    &["h", "n_steps", "defect"],
                    rows,
                    records,
                )
            }
        };

    let path = write_output(&cmd.output_dir, file, header, &rows)?;
    let mut report = vec![format!("wrote {}", path.display())];
    if cmd.verb == Verb::EnergyDrift {
        for r in records.iter().filter(|r| r.is_ok()) {
            let (first, second) =
                drift_halves(r.energy_series.as_deref().unwrap_or(&[]), cfg.t_final);
            report.push(format!(
                "{} h={}: max drift first half {first:.3e}, second half {second:.3e}",
                r.method, r.h
            ));
        }
    }
    check_records(&records)?;
    Ok(Outcome {
        files: vec![path],
        report,
    })
}

fn write_output(
    dir: &Path,
    file: &str,
    header: &[&str],
    rows: &[Vec<Field>],
) -> Result<PathBuf, CliError> {
    let path = dir.join(file);
    std::fs::create_dir_all(dir)
        .and_then(|_| write_csv_file(&path, header, rows))
        .map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn check_records(records: &[RunRecord]) -> Result<(), CliError> {
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| {
            let why = r.aborted.as_deref().unwrap_or("non-finite result");
            format!("{} h={}: {why}", r.method, r.h)
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::RunFailed(format!(
            "{} run(s) failed: {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}

fn solve(cmd: &CliCommand, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (spec, grid, init) = cfg.setup()?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for &method in &cfg.methods {
        for h in cfg.sorted_steps() {
            match integrate(
                method,
                &spec,
                &grid,
                &init,
                h,
                cfg.t_final,
                cfg.observe_every,
            ) {
                Ok(traj) => rows.extend(traj.observations.iter().map(|o| {
                    vec![
                        method.name().into(),
                        h.into(),
                        o.t.into(),
                        o.energy.into(),
                        o.h1.into(),
                        o.l2.into(),
                    ]
                })),
                Err(e) => failed.push(format!("{method} h={h}: {e}")),
            }
        }
    }
    let header = ["method", "h", "t", "energy", "h1_norm", "l2_norm"];
    let path = write_output(&cmd.output_dir, "solve.csv", &header, &rows)?;
    if !failed.is_empty() {
        return Err(CliError::RunFailed(format!(
            "{} run(s) failed: {}",
            failed.len(),
            failed.join("; ")
        )));
    }
    Ok(Outcome {
        report: vec![format!("wrote {}", path.display())],
        files: vec![path],
    })
}

/// Tolerance of the self-test linear-exactness check.
pub const SELFTEST_LINEAR_TOL: f64 = 1e-10;
/// Tolerance of the self-test reversibility check.
pub const SELFTEST_REVERSIBILITY_TOL: f64 = 1e-8;

/// One self-test result.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {}: {:.3e} (tol {:.0e})",
            self.name, self.value, self.tolerance
        )
    }
}

/// Linear exactness of every method and reversibility of the two-step
/// scheme on small grids.
pub fn selftest_checks() -> Result<Vec<Check>, kglr_core::Error> {
    let mut checks = Vec::new();
    let linear = ProblemSpec::new(Nonlinearity::Linear).with_theta(1.5);
    let grid = linear.grid(64)?;
    let init = rough_initial_data(&linear, &grid)?;
    let t_final = 10.0;
    let exact = linear_flow(&grid, &init, t_final);
    for method in MethodTag::ALL {
        for h in [0.1, 0.01] {
            let traj = integrate(method, &linear, &grid, &init, h, t_final, usize::MAX)?;
            checks.push(Check {
                name: format!("linear exactness {method} h={h}"),
                value: relative_err(&traj.final_state, &exact, &grid)?,
                tolerance: SELFTEST_LINEAR_TOL,
            });
        }
    }
    let sine = ProblemSpec::new(Nonlinearity::Sine).with_theta(1.5);
    let init = rough_initial_data(&sine, &grid)?;
    checks.push(Check {
        name: "reversibility SLR h=0.05 n=200".into(),
        value: reversibility_check(&sine, &grid, &init, 0.05, 200)?,
        tolerance: SELFTEST_REVERSIBILITY_TOL,
    });
    Ok(checks)
}

fn selftest() -> Result<Outcome, CliError> {
    let checks = selftest_checks()?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let mut report: Vec<String> = checks.iter().map(Check::to_string).collect();
    report.push(format!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    ));
    if failed > 0 {
        return Err(CliError::RunFailed(report.join("; ")));
    }
    Ok(Outcome {
        files: Vec::new(),
        report,
    })
}
