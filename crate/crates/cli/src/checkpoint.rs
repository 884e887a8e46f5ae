//! Resumable optimizer checkpoints (`checkpoint_<g>.json`).
//!
//! The file holds the complete CMA-ES state as decimal JSON. Sampling uses
//! one RNG stream per generation derived from the run seed, so no RNG state
//! needs saving: restoring the state and continuing at generation `g + 1`
//! reproduces an uninterrupted run exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use triart_core::cmaes::CmaSnapshot;

use crate::RunError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Last completed generation (zero-based).
    pub generation: u64,
    pub seed: u64,
    pub genome_dim: usize,
    pub cma: CmaSnapshot,
}

pub fn checkpoint_path(dir: &Path, generation: u64) -> PathBuf {
    dir.join(format!("checkpoint_{generation}.json"))
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), RunError> {
        let text = serde_json::to_string(self).expect("checkpoints always serialise");
        // write-then-rename so an interrupted write never leaves a torn file
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| RunError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| RunError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let checkpoint: Checkpoint = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            RunError::Config(format!(
                "{}: field `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        if checkpoint.format_version != FORMAT_VERSION {
            return Err(RunError::Config(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                checkpoint.format_version
            )));
        }
        Ok(checkpoint)
    }
}
