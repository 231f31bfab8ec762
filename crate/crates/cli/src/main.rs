use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kglr::{run_command, CliCommand, Verb};

/// Klein-Gordon time-integration experiments.
#[derive(Debug, Parser)]
#[command(name = "kglr", version)]
struct Args {
    /// solve, convergence, efficiency, energy-drift, reversibility, selftest or print-config
    #[arg(value_parser = |s: &str| s.parse::<Verb>())]
    verb: Verb,

    /// Experiment config file (not needed for selftest)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for CSV output
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Override a config key, e.g. --set theta=1.5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads for independent runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Override the random-data seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cmd = CliCommand::new(args.verb, args.config, args.out);
    cmd.overrides = args.overrides;
    cmd.jobs = args.jobs;
    cmd.seed = args.seed;
    ExitCode::from(run_command(&cmd) as u8)
}
