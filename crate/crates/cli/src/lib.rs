//! Run orchestration for evolving triangle scenes: configuration, the
//! evolution loop, checkpoints and artifact export.

pub mod checkpoint;
pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

use triart_core::cmaes::CmaError;
use triart_core::fitness::FitnessError;
use triart_core::scene_file::SceneFileError;

pub use config::RunConfig;
pub use run::{rerender, run, run_with, RunOptions, RunSummary};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scene file: {0}")]
    Scene(#[source] SceneFileError),
    #[error("scorer failure: {0}")]
    Scorer(#[source] FitnessError),
    #[error("optimizer failure: {0}")]
    Optimizer(#[source] CmaError),
    #[error("render output: {0}")]
    Render(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn scene(e: SceneFileError) -> Self {
        match e {
            SceneFileError::Io { path, source } => RunError::Io {
                path: PathBuf::from(path),
                source,
            },
            other => RunError::Scene(other),
        }
    }

    /// Process exit code: 2 config, 3 scorer, 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Scene(_) => 2,
            RunError::Scorer(_) => 3,
            RunError::Io { .. } | RunError::Render(_) => 4,
            RunError::Optimizer(_) => 1,
        }
    }
}
