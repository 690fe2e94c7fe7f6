//! Dense matrices, a Jacobi SVD oracle, and the matrix-sign operators.

mod matrix;
mod polar;
mod svd;

pub use matrix::{Matrix, Scalar};
pub use polar::{
    newton_schulz, newton_schulz_with, polar_factor_exact, NsCoefficients, DEFAULT_NS_ITERS,
};
pub use svd::{svd_small, SvdResult, SVD_MAX_DIM};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected {expected} elements, got {got}")]
    ElementCount { expected: usize, got: usize },
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyDimension { rows: usize, cols: usize },
    #[error("matrix contains non-finite elements")]
    NonFinite,
    #[error("dimension {dim} exceeds the oracle limit of {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("rank-deficient input (σ_min/σ_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("zero input matrix")]
    ZeroInput,
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("Jacobi SVD did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}
