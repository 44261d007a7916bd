//! Command-line front end for the pilot-wave Stern-Gerlach simulator.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when a run completes but its
//! frequencies disagree with the Born rule (some |z| > 4).

pub mod config;
pub mod run;
pub mod svg;

use thiserror::Error;

pub use config::{load_config, parse_config, serialize_config, ExperimentConfig, Kind};
pub use run::{run, Overrides, RunSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BORN_FAIL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl CliError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<pilotwave_core::apparatus::ApparatusError> for CliError {
    fn from(e: pilotwave_core::apparatus::ApparatusError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<pilotwave_core::entangled::EntangledError> for CliError {
    fn from(e: pilotwave_core::entangled::EntangledError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<pilotwave_core::trajectory::TrajectoryError> for CliError {
    fn from(e: pilotwave_core::trajectory::TrajectoryError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<pilotwave_core::wavefield::WaveFieldError> for CliError {
    fn from(e: pilotwave_core::wavefield::WaveFieldError) -> Self {
        CliError::Simulation(e.to_string())
    }
}
