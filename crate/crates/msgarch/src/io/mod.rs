//! File formats and descriptive statistics behind the command-line tool:
//! panel CSV ingestion, rolling moments and cross-sectional densities, the
//! flat key = value configuration format, and the chain directory layout.

mod chain_io;
mod config;
mod panel_csv;
mod stats;

pub use chain_io::{load_chain, write_chain, Manifest};
pub use config::{parse_config_file, parse_config_str, apply_hyperparameters, apply_sampler_config};
pub use panel_csv::{load_panel_csv, prices_to_returns, write_panel};
pub use stats::{cross_section_density, rolling_moments, silverman_bandwidth};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: row {row}, column {column}: {message}")]
    Cell { path: String, row: usize, column: usize, message: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_string(path: &std::path::Path, content: &str) -> Result<(), IoError> {
    std::fs::write(path, content).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}
