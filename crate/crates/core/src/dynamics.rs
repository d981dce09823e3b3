//! Time-domain integration of the reservoir under piecewise-constant drive.
//!
//! Deterministic runs use classic fourth-order Runge-Kutta on `dn/dt = F(n)`;
//! stochastic runs use Euler-Maruyama on the Itô equation
//! `dn = F(n) dt + sqrt(n D) dW` with reflection into `[0, 1]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::model::{drift, ModelError, ModelParams};

/// Integration steps per hold interval in the default configuration.
pub const DEFAULT_STEPS_PER_SYMBOL: usize = 200;
pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 20;
/// Upper limit on the simulated time of [`relax_to_steady`], in units of `1/γ`.
pub const RELAX_TIME_CAP: f64 = 1e4;
const RELAX_DT: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid drive schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid trajectory config: {0}")]
    InvalidConfig(String),
    #[error("no steady state within t = {time} (|F| = {residual:e})")]
    NoConvergence { time: f64, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rabi frequencies held for `hold_time` each, at fixed detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule {
    pub omega_values: Vec<f64>,
    pub hold_time: f64,
    pub delta: f64,
}

impl DriveSchedule {
    pub fn new(omega_values: Vec<f64>, hold_time: f64, delta: f64) -> Result<Self, DynamicsError> {
        let s = Self {
            omega_values,
            hold_time,
            delta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(omega: f64, symbols: usize, hold_time: f64, delta: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![omega; symbols], hold_time, delta)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.hold_time > 0.0 && self.hold_time.is_finite()) {
            return Err(DynamicsError::InvalidSchedule("hold_time must be > 0".into()));
        }
        if !self.delta.is_finite() {
            return Err(DynamicsError::InvalidSchedule("delta must be finite".into()));
        }
        if let Some(bad) = self.omega_values.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(DynamicsError::InvalidSchedule(format!(
                "omega values must be finite and >= 0, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omega_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.hold_time * self.omega_values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    /// Requested integrator step; the step actually used is `hold_time / ceil(hold_time / dt)`.
    pub dt: f64,
    pub seed: u64,
    /// Independent RNG stream for this task under the same seed.
    pub stream: u64,
    pub n0: f64,
    pub samples_per_symbol: usize,
}

impl TrajectoryConfig {
    /// Defaults for a schedule: `dt = T/200`, 20 samples per symbol, `n0 = 0`.
    pub fn for_hold_time(hold_time: f64) -> Self {
        Self {
            dt: hold_time / DEFAULT_STEPS_PER_SYMBOL as f64,
            seed: 0,
            stream: 0,
            n0: 0.0,
            samples_per_symbol: DEFAULT_SAMPLES_PER_SYMBOL,
        }
    }

    fn steps_per_symbol(&self, schedule: &DriveSchedule) -> Result<usize, DynamicsError> {
        if !(self.dt > 0.0) || self.dt > schedule.hold_time / 10.0 * (1.0 + 1e-12) {
            return Err(DynamicsError::InvalidConfig(format!(
                "dt = {} must satisfy 0 < dt <= hold_time/10 = {}",
                self.dt,
                schedule.hold_time / 10.0
            )));
        }
        if !(0.0..=1.0).contains(&self.n0) {
            return Err(DynamicsError::InvalidConfig("n0 must lie in [0, 1]".into()));
        }
        let steps = (schedule.hold_time / self.dt * (1.0 - 1e-12)).ceil() as usize;
        if self.samples_per_symbol == 0 || self.samples_per_symbol > steps {
            return Err(DynamicsError::InvalidConfig(format!(
                "samples_per_symbol must be in 1..={steps}"
            )));
        }
        Ok(steps)
    }
}

/// Sampled reservoir output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_samples: Vec<f64>,
    pub samples_per_symbol: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.n_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.n_samples.last().copied()
    }

    /// Drops the samples that belong to the first `symbols` drive symbols.
    pub fn skip_symbols(&self, symbols: usize) -> Trajectory {
        let from = (symbols * self.samples_per_symbol).min(self.len());
        Trajectory {
            times: self.times[from..].to_vec(),
            n_samples: self.n_samples[from..].to_vec(),
            samples_per_symbol: self.samples_per_symbol,
        }
    }
}

/// Seeded counter-based generator for `(seed, stream)`.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn rk4_step(n: f64, p: &ModelParams, dt: f64) -> f64 {
    let k1 = drift(n, p);
    let k2 = drift(n + 0.5 * dt * k1, p);
    let k3 = drift(n + 0.5 * dt * k2, p);
    let k4 = drift(n + dt * k3, p);
    n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn reflect(n: f64) -> f64 {
    let r = if n < 0.0 {
        -n
    } else if n > 1.0 {
        2.0 - n
    } else {
        n
    };
    r.clamp(0.0, 1.0)
}

fn integrate(
    schedule: &DriveSchedule,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
    mut step: impl FnMut(f64, &ModelParams, f64) -> f64,
) -> Result<Trajectory, DynamicsError> {
    schedule.validate()?;
    p.validate()?;
    if schedule.is_empty() {
        return Err(DynamicsError::InvalidSchedule("schedule is empty".into()));
    }
    let steps = cfg.steps_per_symbol(schedule)?;
    let dt = schedule.hold_time / steps as f64;
    let spp = cfg.samples_per_symbol;
    // Step index (1-based) after which sample j of a symbol is taken.
    let sample_steps: Vec<usize> = (0..spp).map(|j| (j + 1) * steps / spp).collect();

    let total = schedule.len() * spp;
    let mut times = Vec::with_capacity(total);
    let mut samples = Vec::with_capacity(total);
    let mut n = cfg.n0;
    let base = p.with_delta(schedule.delta);
    for (s, &omega) in schedule.omega_values.iter().enumerate() {
        let params = base.with_omega(omega);
        let t0 = s as f64 * schedule.hold_time;
        let mut next_sample = 0;
        for k in 1..=steps {
            n = step(n, &params, dt);
            if next_sample < spp && k == sample_steps[next_sample] {
                times.push(t0 + k as f64 * dt);
                samples.push(n);
                next_sample += 1;
            }
        }
    }
    Ok(Trajectory {
        times,
        n_samples: samples,
        samples_per_symbol: spp,
    })
}

/// Deterministic RK4 integration of `dn/dt = F(n)` with Ω switched per symbol.
pub fn integrate_ode(
    schedule: &DriveSchedule,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory, DynamicsError> {
    integrate(schedule, p, cfg, rk4_step)
}

/// Euler-Maruyama integration of `dn = F(n) dt + sqrt(max(n,0) D dt) Z`,
/// reflecting the density back into `[0, 1]` after every step.
pub fn integrate_sde(
    schedule: &DriveSchedule,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory, DynamicsError> {
    let mut rng = task_rng(cfg.seed, cfg.stream);
    let noise = p.d;
    integrate(schedule, p, cfg, |n, params, dt| {
        let z: f64 = StandardNormal.sample(&mut rng);
        reflect(n + drift(n, params) * dt + (n.max(0.0) * noise * dt).sqrt() * z)
    })
}

/// Integrates the deterministic flow from `n0` until `|F(n)| < tol`.
pub fn relax_to_steady(p: &ModelParams, n0: f64, tol: f64) -> Result<f64, DynamicsError> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(DynamicsError::InvalidConfig("tol must be > 0".into()));
    }
    if !(0.0..=1.0).contains(&n0) {
        return Err(DynamicsError::InvalidConfig("n0 must lie in [0, 1]".into()));
    }
    let mut n = n0;
    let max_steps = (RELAX_TIME_CAP / RELAX_DT).ceil() as usize;
    for _ in 0..max_steps {
        if drift(n, p).abs() < tol {
            return Ok(n);
        }
        n = rk4_step(n, p, RELAX_DT);
    }
    let residual = drift(n, p).abs();
    if residual < tol {
        Ok(n)
    } else {
        Err(DynamicsError::NoConvergence {
            time: RELAX_TIME_CAP,
            residual,
        })
    }
}
