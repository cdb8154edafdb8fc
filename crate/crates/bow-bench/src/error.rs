//! Benchmark error type; the variant determines the process exit code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad invocation or unparsable input files (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// A scenario failed to run (exit code 1).
    #[error("scenario failed: {0}")]
    Scenario(String),
    #[error(transparent)]
    World(#[from] bow_core::world::WorldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::World(e) => match e {
                bow_core::world::WorldError::Parse(_)
                | bow_core::world::WorldError::UnsupportedShape(_) => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}
