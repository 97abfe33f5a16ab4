//! Stochastic delay equations on the segment space: Euler–Maruyama paths,
//! the binding pair, the Girsanov shift coupling and Monte Carlo probes.

mod girsanov;
mod integrate;
mod probes;
mod segment;
mod system;

pub use girsanov::{
    girsanov_coupling_batch, girsanov_coupling_sample, girsanov_shift, shift_stopping_time,
    CoupledPathSample, CouplingSummary, Regime, ShiftPath, StopTime, RESIDUAL_ATTEMPT_CAP,
};
pub use integrate::{
    brownian_increments, contraction_moment_test, integrate, integrate_pair_binding,
    integrate_pair_binding_with_noise, integrate_with_noise, ContractionReport, ContractionRow,
};
pub use probes::{
    apriori_separation_test, default_probes, sdde_dsmall_estimate, stochastic_convolution_test,
    support_probe, AprioriReport, AprioriRow, ConvolutionReport, ConvolutionRow, DSmallReport,
    SupportReport, PROBE_CONFIDENCE,
};
pub use segment::{Path, SegView, Segment};
pub use system::{audit_system, AuditReport, Functional, SddeSystem};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SddeError {
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("grid mismatch: {0}")]
    InvalidGrid(String),
    #[error("the diffusion has no declared right inverse")]
    MissingInverse,
    #[error("initial gap squared {gap2} exceeds eps = {eps}")]
    PreconditionViolated { gap2: f64, eps: f64 },
    #[error("residual sampling gave up after {attempts} proposals")]
    ResidualSamplingStuck { attempts: usize },
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SddeError>;
