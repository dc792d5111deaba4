use serde_json::{json, Value};

use crate::config::Violation;

/// Exit code for a completed run whose built-in checks failed.
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) | CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// The structured record printed to stderr.
    pub fn record(&self) -> Value {
        match self {
            CliError::Validation(v) => json!({ "error": "validation", "violations": v }),
            CliError::Io(m) => json!({ "error": "io", "message": m }),
            CliError::Runtime(m) => json!({ "error": "runtime", "message": m }),
        }
    }
}
