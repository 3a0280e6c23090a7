//! Experiment orchestration: scenario files, the verification experiments
//! and their reports.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::classical::ClassicalError;
use crate::distortion::DistortionError;
use crate::eig::EigError;
use crate::potential::PotentialError;
use crate::wellops::WellOpsError;

pub use config::ScenarioConfig;
pub use experiments::{run_bottom_spectrum, run_experiment, run_gap, run_nontrapping, run_volume, run_weyl};
pub use report::{emit_report, ExperimentKind, ExperimentReport, Format};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("grid with {unknowns} unknowns exceeds the budget of {max}")]
    Budget { unknowns: usize, max: usize },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    WellOps(#[from] WellOpsError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Eig(#[from] EigError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
}
