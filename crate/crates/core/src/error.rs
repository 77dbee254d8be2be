use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid material: {0}")]
    Validation(String),

    #[error("unknown phase index {index} at voxel {voxel} ({phases} phases defined)")]
    UnknownPhase { index: usize, voxel: usize, phases: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolution mismatch: expected {expected}, got {got}")]
    ResolutionMismatch { expected: usize, got: usize },

    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:.3e}, target {target:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("epsilon {epsilon} is not aligned with the domain grid: {reason}")]
    Misaligned { epsilon: f64, reason: String },

    #[error("grid of {voxels} voxels needs ~{needed_mib} MiB for the stray field, budget is {budget_mib} MiB")]
    MemoryBudget {
        voxels: usize,
        needed_mib: usize,
        budget_mib: usize,
    },

    #[error("recovery sequence degenerates at voxel {voxel}: |m0 + corrector| = {norm:.3} < 0.5 (epsilon too large)")]
    DegenerateNormalization { voxel: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
