use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("device specification invalid: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("mesh: {0}")]
    Mesh(String),

    #[error(
        "{stage} did not converge after {iterations} iterations (last residual {residual:.3e})"
    )]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("extraction: {0}")]
    Extraction(String),

    #[error("config {path}:{line}:{column}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
