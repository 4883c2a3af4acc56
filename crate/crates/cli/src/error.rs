use std::io;
use std::path::PathBuf;

use sown_core::{Grid2DError, SimError, SolveError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] Grid2DError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    /// 2 for anything the user can fix in their input, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solve(SolveError::Domain(_))
            | CliError::Grid(Grid2DError::Domain(_))
            | CliError::Grid(Grid2DError::Solve(SolveError::Domain(_)))
            | CliError::Sim(SimError::Config(_))
            | CliError::Sim(SimError::ZeroRateLink { .. }) => 2,
            CliError::Solve(_) | CliError::Grid(_) | CliError::Sim(_) => 3,
            _ => 2,
        }
    }
}
