//! Config-driven experiment runs with JSON and CSV reports.

mod config;
mod report;
mod runner;

pub use config::ExperimentConfig;
pub use report::{emit, Check, CheckVerdict, EmitFormat, RunReport, Statistic, Table};
pub use runner::{run, EXPERIMENTS};

use thiserror::Error;

use crate::coupling::CouplingError;
use crate::harris::HarrisError;
use crate::markov::MarkovError;
use crate::sdde::SddeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("invalid config key {key:?}: {msg}")]
    InvalidConfig { key: String, msg: String },
    #[error("i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Harris(#[from] HarrisError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Sdde(#[from] SddeError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
