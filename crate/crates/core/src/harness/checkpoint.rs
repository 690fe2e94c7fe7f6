//! JSON checkpoints. Floats are written in shortest round-trip form and
//! parsed with correct rounding, so restore is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_atomic, HarnessError, RunConfig, RunRecord};
use crate::optim::ParamSlot;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    /// Number of completed steps.
    pub step: u64,
    /// Per-slot weights, family, step count and moment buffers.
    pub slots: Vec<ParamSlot>,
    pub records: Vec<RunRecord>,
    pub initial_loss: f64,
    pub skipped_orthogonalizations: u64,
}

impl Checkpoint {
    pub fn new(
        config: RunConfig,
        step: u64,
        slots: Vec<ParamSlot>,
        records: Vec<RunRecord>,
        initial_loss: f64,
        skipped_orthogonalizations: u64,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            step,
            slots,
            records,
            initial_loss,
            skipped_orthogonalizations,
        }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(HarnessError::CheckpointMismatch(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), HarnessError> {
    write_atomic(path, ckpt.to_json()?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_json(&text)
}
