use nalgebra::{DMatrix, DVector};

use super::PipelineError;

/// Savitzky-Golay window length and polynomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSpec {
    pub window: usize,
    pub order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self { window: 10, order: 3 }
    }
}

impl FilterSpec {
    pub fn new(window: usize, order: usize) -> Result<Self, PipelineError> {
        let s = Self { window, order };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.window == 0 || self.order >= self.window {
            return Err(PipelineError::InvalidParams(format!(
                "filter needs order < window, got window {} order {}",
                self.window, self.order
            )));
        }
        Ok(())
    }

    /// Offset of the output sample within a full window.
    pub fn center(&self) -> usize {
        self.window / 2
    }
}

/// Weights `h` such that `Σ h[j] y[j]` is the value at position `pos` of the
/// least-squares polynomial of degree `order` through `y[0..len]`.
pub fn savgol_coefficients(len: usize, order: usize, pos: usize) -> Result<Vec<f64>, PipelineError> {
    if len < order + 1 || pos >= len {
        return Err(PipelineError::InvalidParams(format!(
            "cannot fit degree {order} on {len} points at position {pos}"
        )));
    }
    let k = order + 1;
    let scale = len as f64;
    let vander = DMatrix::from_fn(len, k, |r, c| ((r as f64 - pos as f64) / scale).powi(c as i32));
    let qr = vander.qr();
    let mut e0 = DVector::zeros(k);
    e0[0] = 1.0;
    let z = qr
        .r()
        .tr_solve_upper_triangular(&e0)
        .ok_or_else(|| PipelineError::Linalg("singular Vandermonde factor".into()))?;
    Ok((qr.q() * z).iter().copied().collect())
}

/// Window used for output sample `t` of a series of length `n`: the full
/// window when it fits, otherwise the part inside the series, widened
/// inwards to at least `order + 1` points.
fn window_bounds(t: usize, n: usize, spec: &FilterSpec) -> (usize, usize) {
    let c = spec.center();
    let mut lo = t.saturating_sub(c);
    let mut hi = (t + spec.window - c).min(n);
    let need = spec.order + 1;
    if hi - lo < need {
        if lo == 0 {
            hi = need.min(n);
        } else {
            lo = n.saturating_sub(need);
        }
    }
    (lo, hi)
}

/// Smooths `series` sample by sample. Output length equals input length.
pub fn savitzky_golay(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, PipelineError> {
    spec.validate()?;
    let n = series.len();
    if n < spec.order + 1 {
        return Err(PipelineError::TooShort {
            what: "filter input",
            len: n,
            need: spec.order + 1,
        });
    }
    let interior = if n >= spec.window {
        Some(savgol_coefficients(spec.window, spec.order, spec.center())?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (lo, hi) = window_bounds(t, n, spec);
        let y = &series[lo..hi];
        let v = match &interior {
            Some(h) if hi - lo == spec.window && t - lo == spec.center() => dot(h, y),
            _ => dot(&savgol_coefficients(hi - lo, spec.order, t - lo)?, y),
        };
        out.push(v);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
