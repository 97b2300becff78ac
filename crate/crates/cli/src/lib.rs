//! Library half of the `qds` command-line tool. Each subcommand is a plain
//! function so it can be driven from tests without spawning a process.

pub mod commands;
pub mod schema;

use std::fmt;

use qds_core::QdsError;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or unwritable file (exit 1).
    Io(String),
    /// Malformed JSON, wrong shapes or bad arguments (exit 1).
    Schema(String),
    /// The input was read fine but failed a mathematical check (exit 2).
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Schema(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Schema(m) => write!(f, "invalid input: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QdsError> for CliError {
    fn from(e: QdsError) -> Self {
        let witness = match &e {
            QdsError::NotConditionallyCp { witness, .. } => Some(witness),
            QdsError::NotCompletelyPositive { witness, .. } => witness.as_ref(),
            _ => None,
        };
        match witness {
            Some(w) => {
                let json = serde_json::to_string(&schema::MatrixJson::from_matrix(w))
                    .unwrap_or_default();
                CliError::Validation(format!("{e}\nwitness: {json}"))
            }
            None => CliError::Validation(e.to_string()),
        }
    }
}
