//! Experiment config files.
//!
//! A config is a flat list of `key = value` lines. `#` starts a comment, blank
//! lines are ignored, every key may appear at most once.
//!
//! ```text
//! schema_version = 1
//! kind = convergence          # convergence | efficiency | energy-drift | reversibility
//! M = 64
//! theta = 10
//! methods = SLR, LR23, TI
//! step_sizes = 2^-4, 2^-5, 2^-6
//! T_final = 1
//! ```
//!
//! Numbers are decimal literals, fractions `p/q` or powers `b^e`. Lists are
//! comma-separated. Optional keys and their defaults: `rho = 0`,
//! `nonlinearity = sine`, `seed = 0`, `data_scale = 1`, `observe_every = 1`,
//! `h_ref` (smallest step / 8), `drift_ratio = 2`, `schema_version = 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use kglr_core::experiments::{ExperimentConfig, ExperimentKind};
use kglr_core::{MethodTag, Nonlinearity};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

const KEYS: &[&str] = &[
    "schema_version",
    "kind",
    "M",
    "theta",
    "rho",
    "nonlinearity",
    "seed",
    "methods",
    "step_sizes",
    "T_final",
    "data_scale",
    "h_ref",
    "observe_every",
    "drift_ratio",
];

const REQUIRED: &[&str] = &["kind", "M", "theta", "methods", "step_sizes", "T_final"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("override `{text}`: {message}")]
    Override { text: String, message: String },

    #[error("{origin}: missing required key `{key}`")]
    Missing { origin: String, key: &'static str },

    #[error(transparent)]
    Invalid(#[from] kglr_core::Error),
}

/// Raw value with its source position for diagnostics.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

/// Reads, overrides and validates a config file.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string(), overrides)
}

/// Like [`parse_config`] for in-memory text; `origin` labels diagnostics.
pub fn parse_config_str(
    text: &str,
    origin: &str,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let parse_err = |column: usize, message: String| ConfigError::Parse {
            origin: origin.to_string(),
            line,
            column,
            message,
        };
        let Some(eq) = content.find('=') else {
            let column = leading_ws(content) + 1;
            return Err(parse_err(column, "expected `key = value`".into()));
        };
        let key = content[..eq].trim();
        let key_column = leading_ws(content) + 1;
        if !KEYS.contains(&key) {
            return Err(parse_err(key_column, format!("unknown key `{key}`")));
        }
        let value_part = &content[eq + 1..];
        let column = eq + 2 + leading_ws(value_part);
        let value = value_part.trim();
        if value.is_empty() {
            return Err(parse_err(column, format!("empty value for `{key}`")));
        }
        let entry = Entry {
            value: value.to_string(),
            line,
            column,
        };
        if entries.insert(key, entry).is_some() {
            return Err(parse_err(key_column, format!("duplicate key `{key}`")));
        }
    }

    let mut config = Builder::default();
    for (key, entry) in &entries {
        config
            .set(key, &entry.value)
            .map_err(|message| ConfigError::Parse {
                origin: origin.to_string(),
                line: entry.line,
                column: entry.column,
                message,
            })?;
    }
    for text in overrides {
        let (key, value) = text.split_once('=').ok_or_else(|| ConfigError::Override {
            text: text.clone(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::Override {
                text: text.clone(),
                message: format!("unknown key `{key}`"),
            });
        }
        config
            .set(key, value.trim())
            .map_err(|message| ConfigError::Override {
                text: text.clone(),
                message,
            })?;
    }
    config.finish(origin)
}

fn leading_ws(s: &str) -> usize {
    s.len() - s.trim_start().len()
}

#[derive(Default)]
struct Builder {
    kind: Option<ExperimentKind>,
    half_modes: Option<usize>,
    theta: Option<f64>,
    rho: Option<f64>,
    nonlinearity: Option<Nonlinearity>,
    seed: Option<u64>,
    methods: Option<Vec<MethodTag>>,
    step_sizes: Option<Vec<f64>>,
    t_final: Option<f64>,
    data_scale: Option<f64>,
    h_ref: Option<f64>,
    observe_every: Option<usize>,
    drift_ratio: Option<f64>,
}

impl Builder {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "schema_version" => {
                let v: u32 = parse_int(value)?;
                if v != SCHEMA_VERSION {
                    return Err(format!(
                        "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
                    ));
                }
            }
            "kind" => self.kind = Some(value.parse()?),
            "M" => self.half_modes = Some(parse_int(value)?),
            "theta" => self.theta = Some(parse_number(value)?),
            "rho" => self.rho = Some(parse_number(value)?),
            "nonlinearity" => self.nonlinearity = Some(value.parse()?),
            "seed" => self.seed = Some(parse_int(value)?),
            "methods" => {
                self.methods = Some(
                    split_list(value)
                        .map(str::parse)
                        .collect::<Result<Vec<MethodTag>, _>>()?,
                )
            }
            "step_sizes" => {
                self.step_sizes = Some(
                    split_list(value)
                        .map(parse_number)
                        .collect::<Result<_, _>>()?,
                )
            }
            "T_final" => self.t_final = Some(parse_number(value)?),
            "data_scale" => self.data_scale = Some(parse_number(value)?),
            "h_ref" => self.h_ref = Some(parse_number(value)?),
            "observe_every" => self.observe_every = Some(parse_int(value)?),
            "drift_ratio" => self.drift_ratio = Some(parse_number(value)?),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn finish(self, origin: &str) -> Result<ExperimentConfig, ConfigError> {
        let missing = |key| ConfigError::Missing {
            origin: origin.to_string(),
            key,
        };
        let mut cfg = ExperimentConfig::new(
            self.kind.ok_or_else(|| missing(REQUIRED[0]))?,
            self.half_modes.ok_or_else(|| missing(REQUIRED[1]))?,
            self.theta.ok_or_else(|| missing(REQUIRED[2]))?,
            self.methods.ok_or_else(|| missing(REQUIRED[3]))?,
            self.step_sizes.ok_or_else(|| missing(REQUIRED[4]))?,
            self.t_final.ok_or_else(|| missing(REQUIRED[5]))?,
        );
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.nonlinearity {
            cfg.nonlinearity = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.data_scale {
            cfg.data_scale = v;
        }
        if let Some(v) = self.observe_every {
            cfg.observe_every = v;
        }
        if let Some(v) = self.drift_ratio {
            cfg.drift_ratio = v;
        }
        cfg.h_ref = self.h_ref;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_int<N: std::str::FromStr>(value: &str) -> Result<N, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("expected a nonnegative integer, got `{value}`"))
}

/// Parses `1.5`, `1e-3`, `1/4` or `2^-9`.
pub fn parse_number(value: &str) -> Result<f64, String> {
    let value = value.trim();
    let plain = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("expected a number, got `{value}`"))
    };
    let x = if let Some((base, exp)) = value.split_once('^') {
        plain(base)?.powf(plain(exp)?)
    } else if let Some((num, den)) = value.split_once('/') {
        plain(num)? / plain(den)?
    } else {
        plain(value)?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{value}` is not a finite number"))
    }
}

/// Renders a config that [`parse_config_str`] reads back unchanged.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let list = |items: Vec<String>| items.join(", ");
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
    let _ = writeln!(out, "kind = {}", cfg.kind);
    let _ = writeln!(out, "M = {}", cfg.half_modes);
    let _ = writeln!(out, "theta = {:?}", cfg.theta);
    let _ = writeln!(out, "rho = {:?}", cfg.rho);
    let _ = writeln!(out, "nonlinearity = {}", cfg.nonlinearity);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(
        out,
        "methods = {}",
        list(cfg.methods.iter().map(|m| m.to_string()).collect())
    );
    let _ = writeln!(
        out,
        "step_sizes = {}",
        list(cfg.step_sizes.iter().map(|h| format!("{h:?}")).collect())
    );
    let _ = writeln!(out, "T_final = {:?}", cfg.t_final);
    let _ = writeln!(out, "data_scale = {:?}", cfg.data_scale);
    if let Some(h_ref) = cfg.h_ref {
        let _ = writeln!(out, "h_ref = {h_ref:?}");
    }
    let _ = writeln!(out, "observe_every = {}", cfg.observe_every);
    let _ = writeln!(out, "drift_ratio = {:?}", cfg.drift_ratio);
    out
}
