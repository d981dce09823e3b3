use super::{SignalError, TimeSeriesData};
use crate::dynamics::DriveSchedule;

/// Rabi-frequency range that the input is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingSpec {
    pub omega_min: f64,
    pub omega_max: f64,
}

impl EncodingSpec {
    pub fn new(omega_min: f64, omega_max: f64) -> Result<Self, SignalError> {
        let s = Self { omega_min, omega_max };
        s.validate()?;
        Ok(s)
    }

    /// `[Ω, Ω (1 + depth)]`, i.e. a modulation amplitude `δΩ = depth · Ω`.
    pub fn from_modulation(omega: f64, depth: f64) -> Result<Self, SignalError> {
        Self::new(omega, omega * (1.0 + depth))
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.omega_min >= 0.0 && self.omega_max >= self.omega_min && self.omega_max.is_finite()) {
            return Err(SignalError::InvalidParams(format!(
                "need 0 <= omega_min <= omega_max, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        Ok(())
    }
}

/// Min/max normalization onto `[0, 1]`; a constant series maps to 1/2.
pub fn normalize_unit(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

/// Maps the series affinely onto `[omega_min, omega_max]`, one symbol per sample.
pub fn encode(
    series: &TimeSeriesData,
    spec: &EncodingSpec,
    hold_time: f64,
    delta: f64,
) -> Result<DriveSchedule, SignalError> {
    spec.validate()?;
    let span = spec.omega_max - spec.omega_min;
    let omegas = normalize_unit(&series.values)
        .into_iter()
        .map(|u| spec.omega_min + span * u)
        .collect();
    Ok(DriveSchedule::new(omegas, hold_time, delta)?)
}
