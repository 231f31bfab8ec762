//! Command-line frontend for the Klein-Gordon integrators: config parsing,
//! verb dispatch and CSV output.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{execute, run_command, CliCommand, CliError, Outcome, Verb};
pub use config::{parse_config, parse_config_str, render_config, ConfigError};
