//! Input time series: generation, ingestion and encoding into drive schedules.

mod csv_io;
mod encode;
mod lorenz;

pub use csv_io::{
    export_csv, ingest_csv, ingest_csv_reader, CsvIngest, CsvOptions, EXPORT_INDEX_COLUMN, EXPORT_VALUE_COLUMN,
};
pub use encode::{encode, normalize_unit, EncodingSpec};
pub use lorenz::{lorenz_generate, LorenzParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("lorenz integration diverged at step {step} (|state| = {magnitude:e})")]
    Diverged { step: usize, magnitude: f64 },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("no data rows")]
    Empty,
    #[error("row {row}: cannot parse {cell:?} as a finite number")]
    BadCell { row: u64, cell: String },
    #[error("row {row}: {message}")]
    BadRow { row: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// An ordered, finite, nonempty series of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData {
    pub values: Vec<f64>,
    /// Sample spacing in seconds; informational only.
    pub dt: f64,
    pub label: String,
}

impl TimeSeriesData {
    pub fn new(values: Vec<f64>, dt: f64, label: impl Into<String>) -> Result<Self, SignalError> {
        if values.is_empty() {
            return Err(SignalError::InvalidSeries("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::InvalidSeries(format!("value at index {i} is not finite")));
        }
        Ok(Self {
            values,
            dt,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}
