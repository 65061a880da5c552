//! Batch front end: estimation from a sample file, simulation studies, and
//! constraint checks. Every command returns an [`anyhow::Error`] whose cause
//! chain decides the process exit status; see [`exit_code`].

pub mod args;
pub mod check;
pub mod data;
pub mod error;
pub mod estimate;
pub mod simulate;

use std::fs;
use std::path::Path;

pub use args::{Cli, Command};
pub use error::{exit_code, SchemaError};

/// Version tag written at the top of every JSON result.
pub const SCHEMA_VERSION: u32 = 1;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::CheckConstraints(a) => check::run(a),
    }
}

/// Reads an input file; failure to read counts as a schema violation.
pub(crate) fn read_input(path: &Path) -> Result<String, SchemaError> {
    fs::read_to_string(path).map_err(|e| SchemaError(format!("cannot read {}: {e}", path.display())))
}
