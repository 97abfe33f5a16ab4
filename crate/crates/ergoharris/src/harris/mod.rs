//! Smallness, contraction and weighted-distance certificates on finite kernels.

mod certify;
mod rates;

pub use certify::{
    contraction_check, d_small_check, weak_harris_certify, ContractionCertificate,
    SmallnessCertificate, WeakHarrisReport,
};
pub use rates::{
    cauchy_existence_diagnostic, classical_harris_rate, weak_triangle_constant, CauchyReport,
    HarrisRate,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::markov::{transport::lift_cost, FiniteKernel, MarkovError};

/// Tolerance used when comparing certified inequalities.
pub const CERT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarrisError {
    #[error("set is not d-small: epsilon = {epsilon} (worst pair {pair:?})")]
    NotSmall { epsilon: f64, pair: (usize, usize) },
    #[error("d is not contracting: alpha = {alpha} at pair {pair:?}")]
    NotContracting { alpha: f64, pair: (usize, usize) },
    #[error("no pair has d(x,y) < 1: contraction holds vacuously")]
    VacuouslyContracting,
    #[error("P^t V <= V/8 + K_V fails at state {state}: {lhs} > {rhs}")]
    LyapunovTooWeak { state: usize, lhs: f64, rhs: f64 },
    #[error("level set {{V <= 4 K_V}} is not d-small: {0}")]
    LevelSetNotSmall(String),
    #[error("d is not contracting: {0}")]
    DNotContracting(String),
    #[error("weighted contraction not verified: ratio {ratio} > {bound} at pair {pair:?}")]
    VerificationFailed {
        ratio: f64,
        bound: f64,
        pair: (usize, usize),
    },
    #[error("kernel has {count} invariant measures")]
    MultipleInvariantMeasures { count: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub type Result<T> = std::result::Result<T, HarrisError>;

/// Lifted cost between rows `x` and `y` of `p`, for each listed pair, in order.
pub(crate) fn row_lifts<C>(p: &FiniteKernel, pairs: &[(usize, usize)], cost: C) -> Result<Vec<f64>>
where
    C: Fn(usize, usize) -> f64 + Sync,
{
    let vals = pairs
        .par_iter()
        .map(|&(x, y)| {
            let (v, _, _) = lift_cost(&cost, &p.row_measure(x), &p.row_measure(y))?;
            Ok(v)
        })
        .collect::<std::result::Result<Vec<f64>, MarkovError>>()?;
    Ok(vals)
}

pub(crate) fn all_pairs(states: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &x) in states.iter().enumerate() {
        for &y in &states[i + 1..] {
            out.push((x, y));
        }
    }
    out
}
