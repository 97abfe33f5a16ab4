//! Coupled path simulation on finite chains: pair kernels, asymptotic-coupling
//! verdicts, the hit-then-bind construction, the excursion chain and the
//! supermartingale envelope.

mod envelope;
mod excursion;
mod hitbind;
mod pair_kernel;
mod verdict;

pub use envelope::{envelope_probability, supermartingale_profile, EnvelopeReport};
pub use excursion::{
    excursion_alpha, excursion_chain, excursion_traces, rate_bound_check, Excursion,
    ExcursionTrace, RateBoundReport, RateBoundRow, RateFunction,
};
pub use hitbind::{
    hit_then_bind_alpha, hit_then_bind_coupling, hit_then_bind_samples, HitBindSample,
};
pub use pair_kernel::{
    build_contracting_coupling_kernel, empirical_marginal, sample_coupled_paths, simulate_coupled,
    CouplingKernelOnPairs, PathPair,
};
pub use verdict::{
    asymptotic_verdict, uniqueness_cross_check, AsymptoticVerdict, UniquenessReport, Verdict,
    VerdictRow,
};

use thiserror::Error;

use crate::harris::HarrisError;
use crate::markov::MarkovError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("coupling kernel requires contraction: {0}")]
    NotContracting(String),
    #[error("no N on the schedule fits within path length {len}")]
    HorizonTooShort { len: usize },
    #[error("U is unreachable from B in T_U steps (alpha = 0)")]
    UnreachableU,
    #[error("rate bound violated at n = {n}: {lhs} > {rhs}")]
    BoundViolated { n: usize, lhs: f64, rhs: f64 },
    #[error("invalid rate function: {0}")]
    InvalidRate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Harris(#[from] HarrisError),
}

pub type Result<T> = std::result::Result<T, CouplingError>;
