use super::ExperimentError;

const GRID_POINTS: usize = 50;
const GOLDEN_ITERS: usize = 200;

/// Best fit of `a · exp(-(t - t0) / tau) + b`, with `t0` the first sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    /// Root-mean-square misfit.
    pub residual: f64,
    /// Constant data, or a time constant pinned to the edge of the search range.
    pub degenerate: bool,
}

fn linear_fit(times: &[f64], values: &[f64], tau: f64) -> (f64, f64, f64) {
    let t0 = times[0];
    let n = times.len() as f64;
    let basis: Vec<f64> = times.iter().map(|t| (-(t - t0) / tau).exp()).collect();
    let e_mean = basis.iter().sum::<f64>() / n;
    let y_mean = values.iter().sum::<f64>() / n;
    let mut see = 0.0;
    let mut sey = 0.0;
    for (e, y) in basis.iter().zip(values) {
        see += (e - e_mean) * (e - e_mean);
        sey += (e - e_mean) * (y - y_mean);
    }
    let a = if see > 0.0 { sey / see } else { 0.0 };
    let b = y_mean - a * e_mean;
    let sse: f64 = basis
        .iter()
        .zip(values)
        .map(|(e, y)| {
            let r = a * e + b - y;
            r * r
        })
        .sum();
    (a, b, (sse / n).sqrt())
}

/// Fits an exponential relaxation to `(times, values)`.
///
/// `tau` is searched over `[min spacing, span]` in log space: a 50-point
/// grid picks the starting bracket, golden-section search refines it, and
/// `(a, b)` are solved exactly for every candidate.
pub fn fit_exponential(times: &[f64], values: &[f64]) -> Result<FitResult, ExperimentError> {
    if times.len() != values.len() {
        return Err(ExperimentError::InvalidInput(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 4 {
        return Err(ExperimentError::InvalidInput(
            "exponential fit needs at least 4 samples".into(),
        ));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(ExperimentError::InvalidInput("fit input must be finite".into()));
    }
    let dt_min = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(dt_min > 0.0) {
        return Err(ExperimentError::InvalidInput(
            "fit times must be strictly increasing".into(),
        ));
    }
    let span = times[times.len() - 1] - times[0];
    let (lo, hi) = (dt_min.ln(), span.ln());
    let cost = |u: f64| linear_fit(times, values, u.exp()).2;

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|j| lo + (hi - lo) * j as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let best = (0..GRID_POINTS)
        .min_by(|&i, &j| cost(grid[i]).total_cmp(&cost(grid[j])))
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID_POINTS - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = cost(d);
        }
    }
    let refined = if fc <= fd { c } else { d };
    let u = if cost(refined) <= cost(grid[best]) {
        refined
    } else {
        grid[best]
    };
    let tau = u.exp();
    let (amp, offset, residual) = linear_fit(times, values, tau);

    let (ymin, ymax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let flat = ymax - ymin <= 1e-12 * ymax.abs().max(ymin.abs()).max(1.0);
    let pinned = (u - lo).abs() < 1e-6 || (hi - u).abs() < 1e-6;
    Ok(FitResult {
        a: if flat { 0.0 } else { amp },
        b: if flat {
            values.iter().sum::<f64>() / values.len() as f64
        } else {
            offset
        },
        tau,
        residual: if flat { 0.0 } else { residual },
        degenerate: flat || pinned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<f64> {
        (0..200).map(|j| j as f64 / 199.0).collect()
    }

    #[test]
    fn noiseless_recovery() {
        let t = grid();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-t / 0.139).exp() + 1.0).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!((fit.tau / 0.139 - 1.0).abs() < 1e-3, "tau {}", fit.tau);
        assert!((fit.a - 3.0).abs() < 1e-3 && (fit.b - 1.0).abs() < 1e-3);
        assert!(fit.residual < 1e-6);
        assert!(!fit.degenerate);
    }

    #[test]
    fn rising_edge_and_offset_start() {
        let t: Vec<f64> = (0..100).map(|j| 40.0 + 0.2 * j as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| -0.02 * (-(t - 40.0) / 2.5).exp() + 0.05).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!((fit.tau / 2.5 - 1.0).abs() < 1e-6);
        assert!((fit.a + 0.02).abs() < 1e-8);
    }

    #[test]
    fn constant_is_degenerate() {
        let t = grid();
        let fit = fit_exponential(&t, &vec![2.0; 200]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.residual, 0.0);
        assert_eq!(fit.a, 0.0);
        assert_eq!(fit.b, 2.0);
        assert!(fit.tau > 0.0);
    }

    #[test]
    fn non_monotone_data_still_fits() {
        let t = grid();
        let y: Vec<f64> = t.iter().map(|t| (12.0 * t).sin()).collect();
        let fit = fit_exponential(&t, &y).unwrap();
        assert!(fit.residual > 0.1);
        assert!(fit.tau > 0.0);
    }

    #[test]
    fn noisy_recovery_median() {
        let t = grid();
        let noise = Normal::new(0.0, 0.03).unwrap();
        let mut errors: Vec<f64> = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let y: Vec<f64> = t
                    .iter()
                    .map(|t| 3.0 * (-t / 0.139).exp() + 1.0 + noise.sample(&mut rng))
                    .collect();
                (fit_exponential(&t, &y).unwrap().tau / 0.139 - 1.0).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        let median = 0.5 * (errors[49] + errors[50]);
        assert!(median < 0.05, "median relative error {median}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_exponential(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 1.0, 2.0], &[1.0; 4]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 2.0, 3.0], &[1.0; 3]).is_err());
        assert!(fit_exponential(&[0.0, 1.0, 2.0, 3.0], &[1.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
