//! Learning pipeline: smoothing, multiplexing, windowing, linear readout and
//! error evaluation.

mod csv_io;
mod dataset;
mod readout;
mod savgol;

pub use csv_io::{read_dataset_csv, read_readout_csv, write_dataset_csv, write_readout_csv};
pub use dataset::{build_dataset, multiplex_downsample, DatasetLayout, WindowedDataset};
pub use readout::{evaluate, fit_readout, ReadoutDiagnostics, ReadoutFit, ReadoutModel};
pub use savgol::{savgol_coefficients, savitzky_golay, FilterSpec};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{what} has {len} samples, need at least {need}")]
    TooShort {
        what: &'static str,
        len: usize,
        need: usize,
    },
    #[error("{0}")]
    Empty(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Everything downstream of the reservoir trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub filter: FilterSpec,
    pub layout: DatasetLayout,
    pub train_fraction: f64,
    pub ridge_lambda: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            layout: DatasetLayout::default(),
            train_fraction: 0.7,
            ridge_lambda: 0.0,
        }
    }
}

/// Per-sub-series test errors and their summary at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub per_series_mse: Vec<f64>,
    pub mean_mse: f64,
    /// Population standard deviation of `per_series_mse`.
    pub std_mse: f64,
    pub params: ModelParams,
}

pub fn aggregate(per_series_mse: Vec<f64>, params: ModelParams) -> Result<PredictionReport, PipelineError> {
    if per_series_mse.is_empty() {
        return Err(PipelineError::Empty("no per-series errors to aggregate".into()));
    }
    let (mean_mse, std_mse) = mean_std(&per_series_mse);
    Ok(PredictionReport {
        per_series_mse,
        mean_mse,
        std_mse,
        params,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Filters `trace`, splits it into sub-series, and fits and scores one
/// readout per sub-series against targets drawn from `input`.
pub fn predict_from_trace(
    trace: &[f64],
    input: &[f64],
    settings: &PipelineSettings,
    params: ModelParams,
) -> Result<PredictionReport, PipelineError> {
    let filtered = savitzky_golay(trace, &settings.filter)?;
    let subs = multiplex_downsample(&filtered, settings.layout.stride)?;
    let per_series = subs
        .par_iter()
        .enumerate()
        .map(|(i, sub)| {
            let ds = build_dataset(sub, input, &settings.layout, i + 1)?;
            let (train, test) = ds.split(settings.train_fraction)?;
            let fit = fit_readout(&train, settings.ridge_lambda)?;
            evaluate(&fit.model, &test)
        })
        .collect::<Result<Vec<f64>, PipelineError>>()?;
    aggregate(per_series, params)
}
