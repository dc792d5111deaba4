//! Configuration, execution and result files for the `qthreshold` binary.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

pub use commands::{CommandKind, CommandOutput, RunOptions};
pub use config::{parse_config, ExperimentConfig, ParseOptions, Violation};
pub use error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything one invocation needs besides the thread count.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: CommandKind,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub options: RunOptions,
    pub lenient: bool,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub out_dir: PathBuf,
    pub summary: serde_json::Value,
    pub warnings: Vec<Violation>,
    pub passed: bool,
}

/// Reads and validates a config file.
pub fn load_config(path: &Path, lenient: bool) -> Result<config::Parsed, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, ParseOptions { lenient }).map_err(CliError::Validation)
}

/// Runs one command and writes `summary.json` plus its CSV series.
pub fn run(inv: &Invocation) -> Result<Report, CliError> {
    let parsed = load_config(&inv.config, inv.lenient)?;
    let mut cfg = parsed.config;
    if let Some(seed) = inv.seed {
        cfg.run.root_seed = seed;
    }
    let out = commands::execute(inv.command, &cfg, inv.options)?;
    let out_dir = inv.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    // the echo omits where results go so reruns elsewhere compare equal
    let mut echo = serde_json::to_value(&cfg).expect("config serializes");
    if let Some(o) = echo.as_object_mut() {
        o.remove("output");
    }
    let summary = output::summary_document(inv.command.name(), &echo, &out.statistics);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", out_dir.display()));
    let mut text = serde_json::to_string_pretty(&summary).expect("json");
    text.push('\n');
    for (name, contents) in &out.files {
        output::write_atomic(&out_dir, name, contents.as_bytes()).map_err(io)?;
    }
    output::write_atomic(&out_dir, "summary.json", text.as_bytes()).map_err(io)?;
    Ok(Report { out_dir, summary, warnings: parsed.warnings, passed: out.passed })
}
