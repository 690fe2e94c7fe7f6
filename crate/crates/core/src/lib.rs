//! Variance-adaptive Muon optimizers and their verification toolkit.
//!
//! - [`linalg`]: dense matrices, a Jacobi SVD oracle, Newton–Schulz.
//! - [`moments`]: EMA mean / variance-surrogate recursions.
//! - [`optim`]: Muon, Muon-NSR, Muon-VS, Muon-NSR-Reshuffled, AdamW, Signum.
//! - [`problems`]: toy objectives with analytic gradients and seeded noise.
//! - [`verify`]: oracle checks for the identities the optimizers rely on.
//! - `harness` (feature `harness`): configs, runs, metric files, checkpoints, sweeps.

pub mod linalg;
pub mod moments;
pub mod optim;
pub mod problems;
pub mod verify;

#[cfg(feature = "harness")]
pub mod harness;

pub use linalg::{LinalgError, Matrix};
pub use moments::MomentState;
pub use optim::{Optimizer, OptimizerConfig, ScaleRule, Schedule, Variant};
