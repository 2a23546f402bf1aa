//! Command-line front end: scenario files, figure presets, analytic reports,
//! simulation runs, analytic-versus-simulation comparisons and sweeps
//! written as CSV.

pub mod commands;
pub mod scenario;
pub mod selfcheck;
pub mod table;

use std::fmt;
use std::path::Path;

pub use scenario::{ParseError, Scenario};

/// Exit status for validation failures, including instability.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for malformed configuration.
pub const EXIT_PARSE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { code: EXIT_VALIDATION, message }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self { code: EXIT_VALIDATION, message: format!("{}: {err}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        Self { code: EXIT_PARSE, message: e.to_string() }
    }
}
