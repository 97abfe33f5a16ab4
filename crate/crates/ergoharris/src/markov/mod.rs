//! Finite Markov kernels, probability vectors and transport lifts.

mod distance;
mod invariant;
pub mod io;
mod kernel;
mod lyapunov;
mod measure;
pub mod transport;

pub use distance::{weighted_distance, ContinuumDistance, DistanceLike, Metric, WeightedDistance};
pub use invariant::{invariant_measures, ErgodicClass};
pub use kernel::{make_finite_kernel, FiniteKernel};
pub use lyapunov::{lyapunov_check, LyapunovCertificate};
pub use measure::{total_variation, Measure};
pub use transport::{lift_distance, wasserstein1, wasserstein1_signed, CouplingPlan};

use thiserror::Error;

/// Tolerance for row sums and measure totals.
pub const SUM_TOL: f64 = 1e-12;
/// Row sums off by less than this are renormalised on input.
pub const ROW_RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid distance: {0}")]
    InvalidDistance(String),
    #[error("triangle inequality fails at ({x}, {y}, {z}): {lhs} > {rhs}")]
    TriangleViolation {
        x: usize,
        y: usize,
        z: usize,
        lhs: f64,
        rhs: f64,
    },
    #[error("transport solver failed: {0}")]
    SolverNonconvergence(String),
    #[error("no Lyapunov certificate: {0}")]
    NoCertificate(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MarkovError>;
