use rayon::prelude::*;

use super::{drift, stationary_states, ModelError, ModelParams, StationarySet, ROOT_TOLERANCE};

/// Stationary-state counts over a (Δ, Ω) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub delta_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    /// `root_counts[i][j]` belongs to `omega_grid[i]`, `delta_grid[j]`;
    /// `None` marks a cell where the root solver failed.
    pub root_counts: Vec<Vec<Option<usize>>>,
    pub bistable_mask: Vec<Vec<bool>>,
}

/// Axis-aligned bounds of the bistable cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistableBounds {
    pub delta_min: f64,
    pub delta_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl PhaseDiagram {
    pub fn bistable_bounds(&self) -> Option<BistableBounds> {
        let mut bounds: Option<BistableBounds> = None;
        for (i, row) in self.bistable_mask.iter().enumerate() {
            for (j, _) in row.iter().enumerate().filter(|(_, &b)| b) {
                let (d, o) = (self.delta_grid[j], self.omega_grid[i]);
                bounds = Some(match bounds {
                    None => BistableBounds {
                        delta_min: d,
                        delta_max: d,
                        omega_min: o,
                        omega_max: o,
                    },
                    Some(b) => BistableBounds {
                        delta_min: b.delta_min.min(d),
                        delta_max: b.delta_max.max(d),
                        omega_min: b.omega_min.min(o),
                        omega_max: b.omega_max.max(o),
                    },
                });
            }
        }
        bounds
    }

    pub fn failed_cells(&self) -> usize {
        self.root_counts.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Whether any cell of Ω-row `row` is bistable.
    pub fn row_is_bistable(&self, row: usize) -> bool {
        self.bistable_mask[row].iter().any(|&b| b)
    }
}

/// Counts stationary states independently at every grid point.
///
/// Only malformed grids are errors; solver failures are recorded per cell.
pub fn phase_diagram(delta_grid: &[f64], omega_grid: &[f64], base: &ModelParams) -> Result<PhaseDiagram, ModelError> {
    if delta_grid.is_empty() || omega_grid.is_empty() {
        return Err(ModelError::InvalidSweep("grids must be nonempty".into()));
    }
    if delta_grid.iter().chain(omega_grid).any(|x| !x.is_finite()) {
        return Err(ModelError::InvalidSweep("grid values must be finite".into()));
    }
    base.validate()?;

    let root_counts: Vec<Vec<Option<usize>>> = omega_grid
        .par_iter()
        .map(|&omega| {
            delta_grid
                .iter()
                .map(|&delta| {
                    stationary_states(&base.with_omega(omega).with_delta(delta))
                        .ok()
                        .map(|s| s.count())
                })
                .collect()
        })
        .collect();
    let bistable_mask = root_counts
        .iter()
        .map(|row| row.iter().map(|c| *c == Some(3)).collect())
        .collect();

    Ok(PhaseDiagram {
        delta_grid: delta_grid.to_vec(),
        omega_grid: omega_grid.to_vec(),
        root_counts,
        bistable_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Up,
    Down,
}

impl SweepDirection {
    pub fn label(self) -> &'static str {
        match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisPoint {
    pub delta: f64,
    pub n_ss: f64,
    pub tau_relax: Option<f64>,
    /// False when the root solver failed; `n_ss` then repeats the last good value.
    pub converged: bool,
    /// The branch followed so far vanished and the state dropped onto another one.
    pub jumped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisBranch {
    pub direction: SweepDirection,
    pub points: Vec<HysteresisPoint>,
}

impl HysteresisBranch {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n_ss).collect()
    }

    /// Index of the first point reached by a jump, if any.
    pub fn first_jump(&self) -> Option<usize> {
        self.points.iter().position(|p| p.jumped)
    }
}

/// Equally spaced sweep grid from `from` to `to` inclusive. Reversed bounds
/// give exactly the reversed grid.
pub fn sweep_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![from];
    }
    let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
    let mut grid: Vec<f64> = (0..steps)
        .map(|j| {
            if j == steps - 1 {
                hi
            } else {
                lo + (hi - lo) * j as f64 / (steps - 1) as f64
            }
        })
        .collect();
    if from > to {
        grid.reverse();
    }
    grid
}

/// The stationary state the deterministic flow reaches from `n`.
fn flow_target(set: &StationarySet, n: f64) -> usize {
    let f = drift(n, &set.params);
    let roots = &set.states;
    let nearest = || {
        (0..roots.len())
            .min_by(|&a, &b| (roots[a].n_ss - n).abs().total_cmp(&(roots[b].n_ss - n).abs()))
            .unwrap_or(0)
    };
    if f.abs() < ROOT_TOLERANCE {
        nearest()
    } else if f > 0.0 {
        roots.iter().position(|s| s.n_ss > n).unwrap_or_else(nearest)
    } else {
        roots.iter().rposition(|s| s.n_ss < n).unwrap_or_else(nearest)
    }
}

/// Quasi-static detuning sweep at fixed Ω.
///
/// The state starts on the attractor reached from the ground state `n = 0`.
/// At each later detuning the previous density relaxes under the new drift
/// to a stationary state; while the tracked branch survives this is its
/// continuation, and when it vanishes the state drops onto the surviving
/// attractor in the direction of the flow.
pub fn hysteresis_sweep(
    base: &ModelParams,
    delta_from: f64,
    delta_to: f64,
    steps: usize,
) -> Result<HysteresisBranch, ModelError> {
    base.validate()?;
    if !delta_from.is_finite() || !delta_to.is_finite() {
        return Err(ModelError::InvalidSweep("sweep bounds must be finite".into()));
    }
    let zero_width = delta_from == delta_to;
    if !zero_width && steps < 2 {
        return Err(ModelError::InvalidSweep("steps must be >= 2".into()));
    }
    let direction = if delta_to < delta_from {
        SweepDirection::Down
    } else {
        SweepDirection::Up
    };
    let grid = sweep_grid(delta_from, delta_to, if zero_width { 1 } else { steps });

    let mut points = Vec::with_capacity(grid.len());
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut last_n = 0.0;
    for delta in grid {
        let set = match stationary_states(&base.with_delta(delta)) {
            Ok(set) => set,
            Err(_) => {
                points.push(HysteresisPoint {
                    delta,
                    n_ss: last_n,
                    tau_relax: None,
                    converged: false,
                    jumped: false,
                });
                prev = None;
                continue;
            }
        };
        let start = prev.as_ref().map_or(0.0, |(n, _)| *n);
        let state = set.states[flow_target(&set, start)];
        let jumped = prev.as_ref().is_some_and(|(n_prev, stable_prev)| {
            let continued_from = stable_prev
                .iter()
                .copied()
                .min_by(|a, b| (a - state.n_ss).abs().total_cmp(&(b - state.n_ss).abs()));
            continued_from.is_some_and(|r| r != *n_prev)
        });
        points.push(HysteresisPoint {
            delta,
            n_ss: state.n_ss,
            tau_relax: state.tau_relax,
            converged: true,
            jumped,
        });
        last_n = state.n_ss;
        prev = Some((state.n_ss, set.stable().map(|s| s.n_ss).collect()));
    }
    Ok(HysteresisBranch { direction, points })
}
