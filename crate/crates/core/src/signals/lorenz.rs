use super::{SignalError, TimeSeriesData};

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Lorenz system `x' = σ(y - x)`, `y' = ρx - y - xz`, `z' = xy - βz`.
///
/// Defaults use the standard chaotic coefficients ρ = 28, β = 8/3. The
/// alternative labelling β = 28, ρ = 8/3 is available through
/// [`LorenzParams::swapped_labels`]; it converges to a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    /// Integration and sampling step, seconds.
    pub dt: f64,
    /// Number of recorded samples.
    pub steps: usize,
    pub initial: [f64; 3],
    /// Seconds integrated and discarded before recording starts.
    pub transient: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.04,
            steps: 16_000,
            initial: [1.0, 1.0, 1.0],
            transient: 10.0,
        }
    }
}

impl LorenzParams {
    pub fn swapped_labels() -> Self {
        Self {
            rho: 8.0 / 3.0,
            beta: 28.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SignalError::InvalidParams("lorenz dt must be > 0".into()));
        }
        if self.steps == 0 {
            return Err(SignalError::InvalidParams("lorenz steps must be >= 1".into()));
        }
        if !(self.transient >= 0.0 && self.transient.is_finite()) {
            return Err(SignalError::InvalidParams("lorenz transient must be >= 0".into()));
        }
        let coeffs = [self.sigma, self.rho, self.beta];
        if coeffs.iter().chain(&self.initial).any(|v| !v.is_finite()) {
            return Err(SignalError::InvalidParams(
                "lorenz coefficients and initial state must be finite".into(),
            ));
        }
        Ok(())
    }

    fn rhs(&self, s: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = s;
        [self.sigma * (y - x), self.rho * x - y - x * z, x * y - self.beta * z]
    }

    fn rk4(&self, s: [f64; 3]) -> [f64; 3] {
        let h = self.dt;
        let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        let k1 = self.rhs(s);
        let k2 = self.rhs(add(s, k1, 0.5 * h));
        let k3 = self.rhs(add(s, k2, 0.5 * h));
        let k4 = self.rhs(add(s, k3, h));
        std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    /// Integrates and returns the full state at every recorded sample.
    pub fn trajectory(&self) -> Result<Vec<[f64; 3]>, SignalError> {
        self.validate()?;
        let discard = (self.transient / self.dt).round() as usize;
        let mut state = self.initial;
        let mut out = Vec::with_capacity(self.steps);
        for step in 0..discard + self.steps {
            if step >= discard {
                out.push(state);
            }
            state = self.rk4(state);
            let magnitude = state.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if !(magnitude <= DIVERGENCE_LIMIT) {
                return Err(SignalError::Diverged {
                    step: step + 1,
                    magnitude,
                });
            }
        }
        Ok(out)
    }
}

/// x-component of the Lorenz system, sampled every `dt` for `steps` samples
/// after the discarded transient.
pub fn lorenz_generate(lp: &LorenzParams) -> Result<TimeSeriesData, SignalError> {
    let values = lp.trajectory()?.into_iter().map(|s| s[0]).collect();
    TimeSeriesData::new(values, lp.dt, "lorenz-x")
}
