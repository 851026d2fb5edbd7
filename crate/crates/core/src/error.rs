use std::path::PathBuf;

use crate::spin::Parity;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("basis mismatch: expected dimension {expected}, got {found}")]
    BasisMismatch { expected: usize, found: usize },

    #[error("control parameter must be positive and finite, got {0}")]
    InvalidLambda(f64),

    #[error("operator couples m to m±1 (entry {row},{col}); it is not parity-block-diagonal")]
    NotParityBlockDiagonal { row: usize, col: usize },

    #[error("eigensolver did not converge in {parity:?} sector at index {index}")]
    NoConvergence { parity: Option<Parity>, index: usize },

    #[error("time {t} outside schedule range [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("norm deviation {deviation:e} at t = {t} exceeds tolerance {tolerance:e}")]
    NormDrift { t: f64, deviation: f64, tolerance: f64 },

    #[error("invalid propagation step {0}")]
    InvalidStep(f64),

    #[error("dimension {dim} exceeds the dense-oracle limit {limit}")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("cycle record is incomplete: {0}")]
    IncompleteCycle(String),

    #[error("degeneracy tolerance must be non-negative, got {0}")]
    InvalidTolerance(f64),

    #[error("empty averaging window [{0}, {1}]")]
    EmptyWindow(f64, f64),

    #[error("distributions refer to different observables or outcome sets")]
    ObservableMismatch,

    #[error("cache file {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
