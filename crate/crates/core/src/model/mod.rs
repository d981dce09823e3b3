//! Mean-field model of a driven-dissipative Rydberg ensemble.
//!
//! After adiabatic elimination of the optical coherence the Rydberg density
//! `n` obeys a single scalar equation
//!
//! ```text
//! dn/dt = F(n) = -Ω² Γ (n - 1/2) / (Γ² + (Δ - n V)²) - γ n,   Γ = (γ + γ_d) / 2
//! ```
//!
//! All rates are expressed in units of the spontaneous-emission rate `γ`,
//! which is normally set to 1 so that time is measured in units of `1/γ`.

mod stationary;
mod sweep;

pub use stationary::{
    locate_count_transitions, relaxation_time, stationary_states, StationarySet, StationaryState, MERGE_TOLERANCE,
    ROOT_TOLERANCE, SPINODAL_SLOPE,
};
pub use sweep::{
    hysteresis_sweep, phase_diagram, sweep_grid, BistableBounds, HysteresisBranch, HysteresisPoint, PhaseDiagram,
    SweepDirection,
};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParams(String),
    #[error("newton polish did not converge near n = {near} (|F| = {residual:e})")]
    NoConvergence { near: f64, residual: f64 },
    #[error("state n = {n} is marginal (|F'| = {slope:e}); relaxation time diverges")]
    Spinodal { n: f64, slope: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Physical parameters of the mean-field model, in units of `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Rabi frequency Ω.
    pub omega: f64,
    /// Detuning Δ.
    pub delta: f64,
    /// Spontaneous-emission rate γ.
    pub gamma: f64,
    /// Dephasing rate γ_d.
    pub gamma_d: f64,
    /// Interaction shift V.
    pub v: f64,
    /// Noise strength D of the stochastic extension.
    pub d: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega: 1.1,
            delta: 0.0,
            gamma: 1.0,
            gamma_d: 10.0,
            v: 100.0,
            d: 1e-4,
        }
    }
}

impl ModelParams {
    pub fn new(omega: f64, delta: f64, gamma: f64, gamma_d: f64, v: f64, d: f64) -> Result<Self, ModelError> {
        let p = Self {
            omega,
            delta,
            gamma,
            gamma_d,
            v,
            d,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega", self.omega),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("gamma_d", self.gamma_d),
            ("v", self.v),
            ("d", self.d),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, x)| !x.is_finite()) {
            return Err(ModelError::InvalidParams(format!("{name} must be finite")));
        }
        if self.gamma <= 0.0 {
            return Err(ModelError::InvalidParams("gamma must be > 0".into()));
        }
        if self.gamma_d < 0.0 {
            return Err(ModelError::InvalidParams("gamma_d must be >= 0".into()));
        }
        if self.omega < 0.0 {
            return Err(ModelError::InvalidParams("omega must be >= 0".into()));
        }
        if self.d < 0.0 {
            return Err(ModelError::InvalidParams("d must be >= 0".into()));
        }
        Ok(())
    }

    /// Combined dissipation rate Γ = (γ + γ_d) / 2.
    pub fn big_gamma(&self) -> f64 {
        0.5 * (self.gamma + self.gamma_d)
    }

    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn with_noise(self, d: f64) -> Self {
        Self { d, ..self }
    }
}

/// Mean-field drift F(n).
pub fn drift(n: f64, p: &ModelParams) -> f64 {
    let g = p.big_gamma();
    let detuning = p.delta - n * p.v;
    let denom = g * g + detuning * detuning;
    -p.omega * p.omega * g * (n - 0.5) / denom - p.gamma * n
}

/// Analytic derivative dF/dn.
pub fn drift_slope(n: f64, p: &ModelParams) -> f64 {
    let g = p.big_gamma();
    let detuning = p.delta - n * p.v;
    let denom = g * g + detuning * detuning;
    let drive = p.omega * p.omega * g;
    drive * (-1.0 / denom - 2.0 * p.v * (n - 0.5) * detuning / (denom * denom)) - p.gamma
}

/// Adiabatically eliminated optical coherence q(n).
///
/// Satisfies `Ω·Im[q] - γ n == drift(n, p)`.
pub fn coherence_adiabatic(n: f64, p: &ModelParams) -> Complex64 {
    let numerator = Complex64::new(0.0, -p.omega * (n - 0.5));
    let denominator = Complex64::new(p.big_gamma(), p.delta - n * p.v);
    numerator / denominator
}
