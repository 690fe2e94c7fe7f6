//! Experiment driver: configs, the training loop, metric files, checkpoints
//! and parameter sweeps.

mod checkpoint;
mod config;
mod metrics;
mod run;
mod sweep;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{
    load_config, OptimizerSection, OutputSection, RunConfig, DEFAULT_CLIP_NORM, DEFAULT_LOG_EVERY,
    DEFAULT_STEPS,
};
pub use metrics::{
    emit_metrics, load_summary, parse_csv, records_to_csv, summary_to_json, BuildInfo,
    EmittedFiles, SummaryFile, CSV_HEADER,
};
pub use run::{run_experiment, summarize, Experiment, RunOutput, RunRecord, RunSummary};
pub use sweep::{
    is_unimodal, parse_values, point_config, run_sweep, sweep_report, SweepParam, SweepPoint,
    SweepReport, SweepRow,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::optim::OptimError;
use crate::problems::ProblemError;

/// Environment variable capping worker threads for sweeps and verification.
pub const WORKERS_ENV: &str = "BENCH_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("non-finite value at step {}: loss {}, grad norm {}, update norm {}",
        diagnostic.step, diagnostic.train_loss, diagnostic.grad_norm, diagnostic.update_norm)]
    NonFiniteLoss {
        diagnostic: RunRecord,
        /// Records logged before the failure.
        records: Vec<RunRecord>,
    },
    #[error("run stopped at step {step} of {total}")]
    Incomplete { step: u64, total: u64 },
    #[error("checkpoint does not fit this run: {0}")]
    CheckpointMismatch(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("no records to write")]
    EmptyRecords,
}

impl HarnessError {
    /// True for failures caused by the configuration rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse(_)
                | HarnessError::Invalid { .. }
                | HarnessError::Problem(ProblemError::InvalidSpec(_))
                | HarnessError::Optim(OptimError::InvalidConfig(_))
                | HarnessError::CheckpointMismatch(_)
        )
    }
}

/// Reads the worker cap from [`WORKERS_ENV`]; unset, empty or 0 means no cap.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Caps the global worker pool from [`WORKERS_ENV`]. Must run before any
/// parallel work; later calls have no effect. Returns the cap if one was set.
pub fn apply_worker_cap() -> Option<usize> {
    let n = workers_from_env()?;
    #[cfg(feature = "parallel")]
    {
        // fails only if the pool already exists, in which case it stays as is
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Some(n)
}

/// Writes through a temporary sibling file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
