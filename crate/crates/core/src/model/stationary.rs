use super::{drift, drift_slope, ModelError, ModelParams};

/// Newton polish stops once |F(n)| falls below this value (units γ = 1).
pub const ROOT_TOLERANCE: f64 = 1e-13;
/// Roots closer than this are reported as one (colliding) state.
pub const MERGE_TOLERANCE: f64 = 1e-9;
/// |F'| below this marks a marginal state with divergent relaxation time.
pub const SPINODAL_SLOPE: f64 = 1e-10;

const MAX_NEWTON_STEPS: usize = 100;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryState {
    pub n_ss: f64,
    /// dF/dn at `n_ss`.
    pub slope: f64,
    pub stable: bool,
    /// `1/|F'(n_ss)|`, absent for marginal states.
    pub tau_relax: Option<f64>,
}

impl StationaryState {
    fn classify(n_ss: f64, p: &ModelParams) -> Self {
        let slope = drift_slope(n_ss, p);
        Self {
            n_ss,
            slope,
            stable: slope < 0.0,
            tau_relax: relaxation_time(n_ss, p).ok(),
        }
    }
}

/// All stationary states at one parameter point, sorted by ascending density.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySet {
    pub params: ModelParams,
    pub states: Vec<StationaryState>,
}

impl StationarySet {
    pub fn count(&self) -> usize {
        self.states.len()
    }

    pub fn is_bistable(&self) -> bool {
        self.stable().count() == 2
    }

    pub fn stable(&self) -> impl Iterator<Item = &StationaryState> {
        self.states.iter().filter(|s| s.stable)
    }
}

/// Relaxation time `1/|F'(n_ss)|` from the analytic derivative.
pub fn relaxation_time(n_ss: f64, p: &ModelParams) -> Result<f64, ModelError> {
    let slope = drift_slope(n_ss, p);
    if slope.abs() < SPINODAL_SLOPE {
        return Err(ModelError::Spinodal { n: n_ss, slope });
    }
    Ok(1.0 / slope.abs())
}

/// Cubic P(n) = c3 n³ + c2 n² + c1 n - Ω²Γ/2 with F(n) = -P(n) / (Γ² + (Δ - nV)²).
struct StationaryCubic {
    c3: f64,
    c2: f64,
    c1: f64,
}

impl StationaryCubic {
    fn new(p: &ModelParams) -> Self {
        let g = p.big_gamma();
        let drive = p.omega * p.omega * g;
        Self {
            c3: p.gamma * p.v * p.v,
            c2: -2.0 * p.gamma * p.delta * p.v,
            c1: p.gamma * (g * g + p.delta * p.delta) + drive,
        }
    }

    /// Real roots of P'(n) = 3 c3 n² + 2 c2 n + c1, ascending.
    fn critical_points(&self) -> Vec<f64> {
        let (a, b, c) = (3.0 * self.c3, 2.0 * self.c2, self.c1);
        if a == 0.0 {
            return Vec::new();
        }
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (mut r1, mut r2) = (q / a, if q != 0.0 { c / q } else { -q / a });
        if r1 > r2 {
            std::mem::swap(&mut r1, &mut r2);
        }
        vec![r1, r2]
    }
}

/// Locates every stationary state in `[0, 1/2)`.
///
/// The cubic is split into monotone pieces at its critical points, each sign
/// change of `F` is bisected to full precision and then Newton-polished on `F`.
pub fn stationary_states(p: &ModelParams) -> Result<StationarySet, ModelError> {
    p.validate()?;
    let f = |n: f64| drift(n, p);

    if p.omega == 0.0 {
        // F(n) = -γ n: the ground state is the only fixed point.
        return Ok(StationarySet {
            params: *p,
            states: vec![StationaryState::classify(0.0, p)],
        });
    }

    if p.v == 0.0 {
        let g = p.big_gamma();
        let drive = p.omega * p.omega * g;
        let n = drive / (2.0 * (p.gamma * (g * g + p.delta * p.delta) + drive));
        return Ok(StationarySet {
            params: *p,
            states: vec![StationaryState::classify(n, p)],
        });
    }

    let cubic = StationaryCubic::new(p);
    let mut breaks = vec![0.0];
    breaks.extend(cubic.critical_points().into_iter().filter(|&c| c > 0.0 && c < 0.5));
    breaks.push(0.5);

    let mut roots: Vec<f64> = Vec::with_capacity(3);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
        } else if flo.signum() != fhi.signum() && fhi != 0.0 {
            roots.push(polish(p, bisect(&f, lo, hi, flo))?);
        }
    }
    // A critical point sitting on the axis is a tangent (double) root.
    for &c in &breaks[1..breaks.len() - 1] {
        if f(c).abs() < ROOT_TOLERANCE && roots.iter().all(|r| (r - c).abs() >= MERGE_TOLERANCE) {
            roots.push(c);
        }
    }
    roots.sort_by(f64::total_cmp);

    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r - *last).abs() < MERGE_TOLERANCE => *last = 0.5 * (*last + r),
            _ => merged.push(r),
        }
    }

    Ok(StationarySet {
        params: *p,
        states: merged.into_iter().map(|n| StationaryState::classify(n, p)).collect(),
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let lo_sign = flo.signum();
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn polish(p: &ModelParams, start: f64) -> Result<f64, ModelError> {
    let mut n = start;
    let mut best = (drift(n, p).abs(), n);
    for _ in 0..MAX_NEWTON_STEPS {
        let fv = drift(n, p);
        if fv.abs() < best.0 {
            best = (fv.abs(), n);
        }
        if fv.abs() < ROOT_TOLERANCE {
            return Ok(n);
        }
        let slope = drift_slope(n, p);
        if slope == 0.0 {
            break;
        }
        let next = n - fv / slope;
        if !next.is_finite() || (next - start).abs() > 1e-6 {
            break;
        }
        n = next;
    }
    if best.0 < ROOT_TOLERANCE {
        Ok(best.1)
    } else {
        Err(ModelError::NoConvergence {
            near: start,
            residual: best.0,
        })
    }
}

/// Finds the detunings in `[delta_from, delta_to]` where the number of
/// stationary states changes, scanning `steps` equally spaced points and
/// refining each change by bisection to `1e-12`.
pub fn locate_count_transitions(
    base: &ModelParams,
    delta_from: f64,
    delta_to: f64,
    steps: usize,
) -> Result<Vec<f64>, ModelError> {
    if steps < 2 {
        return Err(ModelError::InvalidSweep("steps must be >= 2".into()));
    }
    let count_at = |delta: f64| stationary_states(&base.with_delta(delta)).map(|s| s.count());
    let grid: Vec<f64> = (0..steps)
        .map(|j| delta_from + (delta_to - delta_from) * j as f64 / (steps - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut prev = count_at(grid[0])?;
    for w in grid.windows(2) {
        let next = count_at(w[1])?;
        if next != prev {
            let (mut a, mut b) = (w[0], w[1]);
            let count_a = prev;
            while (b - a).abs() > 1e-12 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if count_at(mid)? == count_a {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(omega: f64, delta: f64) -> ModelParams {
        ModelParams::new(omega, delta, 1.0, 10.0, 100.0, 0.0).unwrap()
    }

    #[test]
    fn linear_case_closed_form() {
        let p = ModelParams::new(1.3, 2.5, 1.0, 4.0, 0.0, 0.0).unwrap();
        let set = stationary_states(&p).unwrap();
        assert_eq!(set.count(), 1);
        let g = p.big_gamma();
        let drive = p.omega * p.omega * g;
        let expected = drive / (2.0 * (p.gamma * (g * g + p.delta * p.delta) + drive));
        assert!((set.states[0].n_ss - expected).abs() < 1e-15);
        assert!(set.states[0].stable);
    }

    #[test]
    fn linear_resonant_relaxation_time() {
        let p = ModelParams::new(1.3, 0.0, 1.0, 4.0, 0.0, 0.0).unwrap();
        let set = stationary_states(&p).unwrap();
        let g = p.big_gamma();
        let expected = 1.0 / (p.omega * p.omega / g + p.gamma);
        let tau = set.states[0].tau_relax.unwrap();
        assert!((tau - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_drive_has_ground_state_only() {
        let set = stationary_states(&params(0.0, 3.0)).unwrap();
        assert_eq!(set.count(), 1);
        assert_eq!(set.states[0].n_ss, 0.0);
        assert!(set.states[0].stable);
    }

    #[test]
    fn bistable_point_alternates_stability() {
        let set = stationary_states(&params(1.21, 11.45)).unwrap();
        assert_eq!(set.count(), 3);
        let flags: Vec<bool> = set.states.iter().map(|s| s.stable).collect();
        assert_eq!(flags, vec![true, false, true]);
        for s in &set.states {
            assert!(drift(s.n_ss, &set.params).abs() < ROOT_TOLERANCE);
            assert!(s.n_ss > 0.0 && s.n_ss < 0.5);
        }
    }

    #[test]
    fn monostable_cut_has_single_root() {
        for j in 0..=300 {
            let delta = 30.0 * j as f64 / 300.0;
            assert_eq!(stationary_states(&params(1.1, delta)).unwrap().count(), 1);
        }
    }

    #[test]
    fn vanishing_slope_is_spinodal() {
        // F' changes sign between the stable roots of a bistable point; at the
        // zero crossing the relaxation time diverges.
        let p = params(1.21, 11.45);
        let set = stationary_states(&p).unwrap();
        let (mut a, mut b) = (set.states[0].n_ss, set.states[1].n_ss);
        assert!(drift_slope(a, &p) < 0.0 && drift_slope(b, &p) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if drift_slope(mid, &p) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        match relaxation_time(a, &p) {
            Err(ModelError::Spinodal { slope, .. }) => assert!(slope.abs() < SPINODAL_SLOPE),
            other => panic!("expected spinodal, got {other:?}"),
        }
    }

    #[test]
    fn slope_shrinks_towards_count_transition() {
        let p = params(1.21, 0.0);
        let t = locate_count_transitions(&p, 11.0, 12.0, 101).unwrap();
        assert_eq!(t.len(), 2);
        let near = stationary_states(&p.with_delta(t[0] + 1e-9)).unwrap();
        let smallest = near.states.iter().map(|s| s.slope.abs()).fold(f64::INFINITY, f64::min);
        assert!(smallest < 1e-3, "smallest slope {smallest}");
    }

    #[test]
    fn transitions_bracket_bistable_interval() {
        let p = params(1.21, 0.0);
        let t = locate_count_transitions(&p, 0.0, 30.0, 401).unwrap();
        assert_eq!(t.len(), 2);
        assert!(stationary_states(&p.with_delta(0.5 * (t[0] + t[1]))).unwrap().count() == 3);
        assert!(stationary_states(&p.with_delta(t[0] - 1e-6)).unwrap().count() == 1);
        assert!(stationary_states(&p.with_delta(t[1] + 1e-6)).unwrap().count() == 1);
    }
}
