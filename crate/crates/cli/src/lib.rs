//! Batch front-end for the metaporous solver: configuration, parallel sweeps,
//! figure reproduction, rendering and a quick validation suite.

pub mod config;
pub mod render;
pub mod reproduce;
pub mod sweep;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("render error: {0}")]
    Render(String),

    #[error(transparent)]
    Solver(#[from] metaporous::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
