//! Experiment drivers behind the command-line tool: configuration, the five
//! commands and the exponential relaxation fit.

mod commands;
mod config;
mod fit;

pub use commands::{
    hysteresis_for, hysteresis_tables, load_series, manifest, phase_diagram_for, phase_diagram_tables, predict_point,
    predict_sweep_for, predict_sweep_tables, relax_fit_for, relax_fit_tables, relax_times_for, relax_times_tables,
    run_command, BranchCurve, Command, HysteresisResult, PredictPoint, PredictRun, PredictSweepResult, RelaxFitResult,
    RelaxRow, RelaxTimesResult, RunOutput, SegmentFit, Tables, VERSION,
};
pub use config::{linspace, ExperimentConfig, Task};
pub use fit::{fit_exponential, FitResult};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::model::ModelError;
use crate::pipeline::PipelineError;
use crate::signals::SignalError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what}: {source}")]
    Context {
        what: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
