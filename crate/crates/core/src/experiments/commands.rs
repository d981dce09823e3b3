use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{fit_exponential, linspace, ExperimentConfig, ExperimentError, FitResult, Task};
use crate::dynamics::{integrate_ode, integrate_sde, relax_to_steady, DriveSchedule, TrajectoryConfig};
use crate::model::{
    hysteresis_sweep, locate_count_transitions, phase_diagram, relaxation_time, stationary_states, sweep_grid,
    HysteresisBranch, ModelParams, PhaseDiagram, SweepDirection,
};
use crate::pipeline::{mean_std, predict_from_trace, PredictionReport};
use crate::signals::{encode, ingest_csv, lorenz_generate, normalize_unit, CsvOptions, EncodingSpec, TimeSeriesData};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PhaseDiagram,
    Hysteresis,
    RelaxTimes,
    PredictSweep,
    RelaxFit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PhaseDiagram => "phase-diagram",
            Command::Hysteresis => "hysteresis",
            Command::RelaxTimes => "relax-times",
            Command::PredictSweep => "predict-sweep",
            Command::RelaxFit => "relax-fit",
        }
    }

    fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

/// Files written by a command and its human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Validates `cfg`, runs `cmd` on a pool of `cfg.workers` threads and writes
/// its CSV files, summary and manifest into `cfg.out_dir`.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ExperimentError::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let tables = pool.install(|| match cmd {
        Command::PhaseDiagram => phase_diagram_tables(cfg),
        Command::Hysteresis => hysteresis_tables(cfg),
        Command::RelaxTimes => relax_times_tables(cfg),
        Command::PredictSweep => predict_sweep_tables(cfg),
        Command::RelaxFit => relax_fit_tables(cfg),
    })?;

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    let mut files = Vec::new();
    for (name, body) in &tables.files {
        files.push(write_file(dir, name, body)?);
    }
    let stem = cmd.file_stem();
    let mut summary_text = String::new();
    for line in &tables.summary {
        let _ = writeln!(summary_text, "{line}");
    }
    files.push(write_file(dir, &format!("{stem}_summary.txt"), &summary_text)?);
    files.push(write_file(dir, &format!("manifest_{stem}.txt"), &manifest(cmd, cfg))?);
    Ok(RunOutput {
        files,
        summary: tables.summary,
    })
}

/// Resolved configuration preceded by the command and software version as
/// comments, so the file can be fed back through `--config`.
pub fn manifest(cmd: Command, cfg: &ExperimentConfig) -> String {
    format!("# rydberg-rc {VERSION}\n# command: {}\n{}", cmd.name(), cfg.serialize())
}

fn io_context(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Context {
        what: format!("cannot write {}", path.display()),
        source: Box::new(ExperimentError::Io(e)),
    }
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_context(&path, e))?;
    Ok(path)
}

/// File contents produced by a command before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

// ---------------------------------------------------------------- phase diagram

pub fn phase_diagram_for(cfg: &ExperimentConfig) -> Result<PhaseDiagram, ExperimentError> {
    let deltas = linspace(cfg.phase_delta_min, cfg.phase_delta_max, cfg.phase_delta_points);
    let omegas = linspace(cfg.phase_omega_min, cfg.phase_omega_max, cfg.phase_omega_points);
    Ok(phase_diagram(&deltas, &omegas, &cfg.model_params())?)
}

pub fn phase_diagram_tables(cfg: &ExperimentConfig) -> Result<Tables, ExperimentError> {
    let pd = phase_diagram_for(cfg)?;
    let mut csv = String::from("delta,omega,root_count,bistable,status\n");
    for (i, omega) in pd.omega_grid.iter().enumerate() {
        for (j, delta) in pd.delta_grid.iter().enumerate() {
            let (count, status) = match pd.root_counts[i][j] {
                Some(c) => (c.to_string(), "ok"),
                None => (String::new(), "failed"),
            };
            let _ = writeln!(csv, "{delta},{omega},{count},{},{status}", pd.bistable_mask[i][j]);
        }
    }
    let mut summary = vec![format!(
        "grid {} delta x {} omega, {} failed cells",
        pd.delta_grid.len(),
        pd.omega_grid.len(),
        pd.failed_cells()
    )];
    summary.push(match pd.bistable_bounds() {
        Some(b) => format!(
            "bistable region: delta in [{}, {}], omega in [{}, {}]",
            b.delta_min, b.delta_max, b.omega_min, b.omega_max
        ),
        None => "bistable region: empty".into(),
    });
    Ok(Tables {
        files: vec![("phase_diagram.csv".into(), csv)],
        summary,
    })
}

// ---------------------------------------------------------------- hysteresis

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisResult {
    pub up: HysteresisBranch,
    pub down: HysteresisBranch,
    /// Smallest and largest detuning where the branches differ by more than the threshold.
    pub interval: Option<(f64, f64)>,
    pub differing_points: usize,
}

fn cut_params(cfg: &ExperimentConfig) -> ModelParams {
    cfg.model_params().with_omega(cfg.cut_omega)
}

fn cut_bounds(cfg: &ExperimentConfig) -> (f64, f64) {
    (
        cfg.cut_delta_min.min(cfg.cut_delta_max),
        cfg.cut_delta_min.max(cfg.cut_delta_max),
    )
}

pub fn hysteresis_for(cfg: &ExperimentConfig) -> Result<HysteresisResult, ExperimentError> {
    let p = cut_params(cfg);
    let (lo, hi) = cut_bounds(cfg);
    let up = hysteresis_sweep(&p, lo, hi, cfg.cut_delta_points)?;
    let down = hysteresis_sweep(&p, hi, lo, cfg.cut_delta_points)?;
    let mut interval: Option<(f64, f64)> = None;
    let mut differing_points = 0;
    for (a, b) in up.points.iter().zip(down.points.iter().rev()) {
        if (a.n_ss - b.n_ss).abs() > cfg.hysteresis_threshold {
            differing_points += 1;
            interval = Some(interval.map_or((a.delta, a.delta), |(l, h)| (l.min(a.delta), h.max(a.delta))));
        }
    }
    Ok(HysteresisResult {
        up,
        down,
        interval,
        differing_points,
    })
}

pub fn hysteresis_tables(cfg: &ExperimentConfig) -> Result<Tables, ExperimentError> {
    let h = hysteresis_for(cfg)?;
    let mut csv = String::from("direction,delta,n_ss,tau_relax,converged,jumped\n");
    for branch in [&h.up, &h.down] {
        for p in &branch.points {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                branch.direction.label(),
                p.delta,
                p.n_ss,
                fmt_opt(p.tau_relax),
                p.converged,
                p.jumped
            );
        }
    }
    let mut summary = vec![format!(
        "omega {}: {} points per sweep",
        cfg.cut_omega,
        h.up.points.len()
    )];
    summary.push(match h.interval {
        Some((l, r)) => format!(
            "hysteresis interval: delta in [{l}, {r}] ({} points differ by > {})",
            h.differing_points, cfg.hysteresis_threshold
        ),
        None => format!("hysteresis interval: empty (threshold {})", cfg.hysteresis_threshold),
    });
    let failed =
        h.up.points
            .iter()
            .chain(&h.down.points)
            .filter(|p| !p.converged)
            .count();
    summary.push(format!("unconverged points: {failed}"));
    Ok(Tables {
        files: vec![("hysteresis.csv".into(), csv)],
        summary,
    })
}

// ---------------------------------------------------------------- relaxation times

/// One stable state at one detuning of the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxRow {
    pub delta: f64,
    /// `single`, `lower` or `upper`; `failed` when the solver did not converge.
    pub branch: &'static str,
    pub n_ss: Option<f64>,
    pub tau_relax: Option<f64>,
    pub spinodal: bool,
}

/// A stable branch followed by a quasi-static sweep until it disappears.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCurve {
    pub direction: SweepDirection,
    /// `(delta, n_ss, tau_relax)` before the first jump.
    pub points: Vec<(f64, f64, f64)>,
    /// Grid detuning of the longest relaxation time.
    pub peak_delta: f64,
    pub peak_tau: f64,
    /// Count transition closest to where the branch ends, if it ends.
    pub spinodal_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxTimesResult {
    pub rows: Vec<RelaxRow>,
    pub transitions: Vec<f64>,
    pub branches: Vec<BranchCurve>,
    pub median_tau: f64,
    pub grid_step: f64,
}

fn branch_curve(branch: &HysteresisBranch, transitions: &[f64]) -> Option<BranchCurve> {
    let end = branch.first_jump().unwrap_or(branch.points.len());
    let points: Vec<(f64, f64, f64)> = branch.points[..end]
        .iter()
        .filter_map(|p| p.tau_relax.map(|t| (p.delta, p.n_ss, t)))
        .collect();
    let peak = points.iter().copied().max_by(|a, b| a.2.total_cmp(&b.2))?;
    let spinodal_delta = branch.first_jump().and_then(|j| {
        let jump_at = branch.points[j].delta;
        transitions
            .iter()
            .copied()
            .min_by(|a, b| (a - jump_at).abs().total_cmp(&(b - jump_at).abs()))
    });
    Some(BranchCurve {
        direction: branch.direction,
        points,
        peak_delta: peak.0,
        peak_tau: peak.2,
        spinodal_delta,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn relax_times_for(cfg: &ExperimentConfig) -> Result<RelaxTimesResult, ExperimentError> {
    let p = cut_params(cfg);
    let (lo, hi) = cut_bounds(cfg);
    let grid = sweep_grid(lo, hi, cfg.cut_delta_points);
    let rows: Vec<Vec<RelaxRow>> = grid
        .par_iter()
        .map(|&delta| match stationary_states(&p.with_delta(delta)) {
            Ok(set) => {
                let stable: Vec<_> = set.stable().collect();
                let two = stable.len() == 2;
                stable
                    .iter()
                    .enumerate()
                    .map(|(k, s)| RelaxRow {
                        delta,
                        branch: match (two, k) {
                            (false, _) => "single",
                            (true, 0) => "lower",
                            (true, _) => "upper",
                        },
                        n_ss: Some(s.n_ss),
                        tau_relax: s.tau_relax,
                        spinodal: s.tau_relax.is_none(),
                    })
                    .collect()
            }
            Err(_) => vec![RelaxRow {
                delta,
                branch: "failed",
                n_ss: None,
                tau_relax: None,
                spinodal: false,
            }],
        })
        .collect();
    let rows: Vec<RelaxRow> = rows.into_iter().flatten().collect();

    let transitions = if grid.len() >= 2 {
        locate_count_transitions(&p, lo, hi, grid.len())?
    } else {
        Vec::new()
    };
    let up = hysteresis_sweep(&p, lo, hi, cfg.cut_delta_points)?;
    let down = hysteresis_sweep(&p, hi, lo, cfg.cut_delta_points)?;
    let branches = [&up, &down]
        .into_iter()
        .filter_map(|b| branch_curve(b, &transitions))
        .collect();
    let mut taus: Vec<f64> = rows.iter().filter_map(|r| r.tau_relax).collect();
    let median_tau = median(&mut taus);
    let grid_step = if grid.len() >= 2 {
        (hi - lo) / (grid.len() - 1) as f64
    } else {
        0.0
    };
    Ok(RelaxTimesResult {
        rows,
        transitions,
        branches,
        median_tau,
        grid_step,
    })
}

pub fn relax_times_tables(cfg: &ExperimentConfig) -> Result<Tables, ExperimentError> {
    let r = relax_times_for(cfg)?;
    let mut csv = String::from("delta,branch,n_ss,tau_relax,spinodal\n");
    for row in &r.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.delta,
            row.branch,
            fmt_opt(row.n_ss),
            fmt_opt(row.tau_relax),
            row.spinodal
        );
    }
    let mut branches = String::from("sweep,delta,n_ss,tau_relax\n");
    for b in &r.branches {
        for (d, n, t) in &b.points {
            let _ = writeln!(branches, "{},{d},{n},{t}", b.direction.label());
        }
    }
    let mut summary = vec![format!(
        "omega {}: count transitions at delta = [{}]",
        cfg.cut_omega,
        r.transitions
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )];
    summary.push(format!("median tau_relax over the cut: {}", r.median_tau));
    for b in &r.branches {
        summary.push(format!(
            "{} branch: peak tau {} at delta {} (spinodal {}; {}x median)",
            b.direction.label(),
            b.peak_tau,
            b.peak_delta,
            b.spinodal_delta.map_or("none".to_string(), |s| s.to_string()),
            b.peak_tau / r.median_tau
        ));
    }
    let marginal = r.rows.iter().filter(|row| row.spinodal).count();
    let failed = r.rows.iter().filter(|row| row.branch == "failed").count();
    summary.push(format!("spinodal rows: {marginal}, failed rows: {failed}"));
    Ok(Tables {
        files: vec![("relax_times.csv".into(), csv), ("relax_branches.csv".into(), branches)],
        summary,
    })
}

// ---------------------------------------------------------------- prediction sweep

/// Outcome of one (seed, detuning) run.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictRun {
    pub seed: u64,
    pub delta_index: usize,
    pub delta: f64,
    pub report: Result<PredictionReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictPoint {
    pub delta: f64,
    /// Mean and population standard deviation of every per-series error at
    /// this detuning, pooled over seeds.
    pub mean_mse: f64,
    pub std_mse: f64,
    pub runs: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictSweepResult {
    pub runs: Vec<PredictRun>,
    pub points: Vec<PredictPoint>,
}

impl PredictSweepResult {
    /// Index of the point with the lowest pooled mean error.
    pub fn argmin(&self) -> Option<usize> {
        (0..self.points.len())
            .filter(|&i| self.points[i].mean_mse.is_finite())
            .min_by(|&a, &b| self.points[a].mean_mse.total_cmp(&self.points[b].mean_mse))
    }
}

/// The raw input series of the prediction task.
pub fn load_series(cfg: &ExperimentConfig) -> Result<TimeSeriesData, ExperimentError> {
    match cfg.task {
        Task::Lorenz => Ok(lorenz_generate(&cfg.lorenz_params())?),
        Task::Csv => {
            let path = cfg
                .csv_path
                .as_ref()
                .ok_or_else(|| ExperimentError::Config("task = csv needs csv_path".into()))?;
            let ingest = ingest_csv(path, &cfg.csv_options()).map_err(|e| ExperimentError::Context {
                what: format!("reading {}", path.display()),
                source: Box::new(e.into()),
            })?;
            Ok(ingest.series)
        }
    }
}

/// Encodes `series`, drives the reservoir at detuning `delta` and scores the
/// readouts. The reservoir starts from the steady state of the first symbol.
pub fn predict_point(
    cfg: &ExperimentConfig,
    series: &TimeSeriesData,
    delta: f64,
    seed: u64,
    stream: u64,
) -> Result<PredictionReport, ExperimentError> {
    if cfg.warmup_symbols >= series.len() {
        return Err(ExperimentError::InvalidInput(format!(
            "warm-up of {} symbols leaves nothing of a {}-sample series",
            cfg.warmup_symbols,
            series.len()
        )));
    }
    let spec = EncodingSpec::from_modulation(cfg.omega, cfg.depth)?;
    let schedule = encode(series, &spec, cfg.hold_time, delta)?;
    let params = cfg.model_params().with_delta(delta);
    let start = relax_to_steady(&params.with_omega(schedule.omega_values[0]), cfg.n0, cfg.relax_tol)?;
    let traj_cfg = TrajectoryConfig {
        dt: cfg.dt,
        seed,
        stream,
        n0: start,
        samples_per_symbol: cfg.samples_per_symbol,
    };
    let trace = integrate_sde(&schedule, &params, &traj_cfg)?.skip_symbols(cfg.warmup_symbols);
    let targets = normalize_unit(&series.values);
    Ok(predict_from_trace(
        &trace.n_samples,
        &targets[cfg.warmup_symbols..],
        &cfg.pipeline_settings(),
        params,
    )?)
}

pub fn predict_sweep_for(cfg: &ExperimentConfig) -> Result<PredictSweepResult, ExperimentError> {
    let series = load_series(cfg)?;
    let deltas = cfg.predict_grid();
    let tasks: Vec<(u64, usize, f64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| deltas.iter().enumerate().map(move |(j, &d)| (s, j, d)))
        .collect();
    let runs: Vec<PredictRun> = tasks
        .par_iter()
        .map(|&(seed, j, delta)| PredictRun {
            seed,
            delta_index: j,
            delta,
            report: predict_point(cfg, &series, delta, seed, j as u64).map_err(|e| e.to_string()),
        })
        .collect();
    let points = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| {
            let at: Vec<&PredictRun> = runs.iter().filter(|r| r.delta_index == j).collect();
            let errors: Vec<f64> = at
                .iter()
                .filter_map(|r| r.report.as_ref().ok())
                .flat_map(|rep| rep.per_series_mse.iter().copied())
                .collect();
            let (mean_mse, std_mse) = if errors.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&errors)
            };
            PredictPoint {
                delta,
                mean_mse,
                std_mse,
                runs: at.len(),
                failed: at.iter().filter(|r| r.report.is_err()).count(),
            }
        })
        .collect();
    Ok(PredictSweepResult { runs, points })
}

fn fmt_finite(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn predict_sweep_tables(cfg: &ExperimentConfig) -> Result<Tables, ExperimentError> {
    let r = predict_sweep_for(cfg)?;
    let mut sweep = String::from("delta,mean_mse,std_mse,runs,failed\n");
    for p in &r.points {
        let _ = writeln!(
            sweep,
            "{},{},{},{},{}",
            p.delta,
            fmt_finite(p.mean_mse),
            fmt_finite(p.std_mse),
            p.runs,
            p.failed
        );
    }
    let mut by_seed = String::from("seed,delta,mean_mse,std_mse,status\n");
    let mut detail = String::from("seed,delta,subseries,mse\n");
    for run in &r.runs {
        match &run.report {
            Ok(rep) => {
                let _ = writeln!(
                    by_seed,
                    "{},{},{},{},ok",
                    run.seed, run.delta, rep.mean_mse, rep.std_mse
                );
                for (i, mse) in rep.per_series_mse.iter().enumerate() {
                    let _ = writeln!(detail, "{},{},{},{mse}", run.seed, run.delta, i + 1);
                }
            }
            Err(e) => {
                let _ = writeln!(
                    by_seed,
                    "{},{},,,\"error: {}\"",
                    run.seed,
                    run.delta,
                    e.replace('"', "'")
                );
            }
        }
    }
    let mut summary = vec![format!(
        "task {}, {} detunings x {} seeds, {} failed runs",
        cfg.task.label(),
        r.points.len(),
        cfg.seeds.len(),
        r.runs.iter().filter(|run| run.report.is_err()).count()
    )];
    if let Some(i) = r.argmin() {
        let p = &r.points[i];
        summary.push(format!(
            "minimum mean mse {} (std {}) at delta {}",
            p.mean_mse, p.std_mse, p.delta
        ));
    }
    Ok(Tables {
        files: vec![
            ("predict_sweep.csv".into(), sweep),
            ("predict_by_seed.csv".into(), by_seed),
            ("predict_detail.csv".into(), detail),
        ],
        summary,
    })
}

// ---------------------------------------------------------------- relaxation fits

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFit {
    pub index: usize,
    pub t_start: f64,
    /// Drive during the segment; known only for simulated traces.
    pub omega: Option<f64>,
    pub fit: Result<FitResult, String>,
    /// Linearized relaxation time of the state the segment settles into.
    pub tau_linear: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxFitResult {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub segments: Vec<SegmentFit>,
    pub simulated: bool,
}

/// Deterministic response to a square-wave drive between Ω and
/// Ω(1 + fit_depth), each level held for `hold_time`, sampled at every
/// integrator step.
fn simulate_square_wave(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ExperimentError> {
    let lo = cfg.omega;
    let hi = cfg.omega * (1.0 + cfg.fit_depth);
    let omegas: Vec<f64> = (0..2 * cfg.fit_periods)
        .map(|s| if s % 2 == 0 { hi } else { lo })
        .collect();
    let schedule = DriveSchedule::new(omegas.clone(), cfg.hold_time, cfg.fit_delta)?;
    let params = cfg.model_params().with_delta(cfg.fit_delta);
    let start = relax_to_steady(&params.with_omega(lo), cfg.n0, cfg.relax_tol)?;
    let steps = (cfg.hold_time / cfg.dt * (1.0 - 1e-12)).ceil() as usize;
    let traj = integrate_ode(
        &schedule,
        &params,
        &TrajectoryConfig {
            dt: cfg.dt,
            seed: cfg.seeds[0],
            stream: 0,
            n0: start,
            samples_per_symbol: steps,
        },
    )?;
    let mut times = vec![0.0];
    let mut values = vec![start];
    times.extend(&traj.times);
    values.extend(&traj.n_samples);
    Ok((times, values, omegas))
}

fn linear_tau(params: &ModelParams, n_end: f64) -> Option<f64> {
    let set = stationary_states(params).ok()?;
    let nearest = set
        .stable()
        .min_by(|a, b| (a.n_ss - n_end).abs().total_cmp(&(b.n_ss - n_end).abs()))?;
    relaxation_time(nearest.n_ss, params).ok()
}

pub fn relax_fit_for(cfg: &ExperimentConfig) -> Result<RelaxFitResult, ExperimentError> {
    let (times, values, omegas, period) = match &cfg.fit_input {
        Some(path) => {
            let read = |column: &str| {
                ingest_csv(
                    path,
                    &CsvOptions {
                        value_column: column.into(),
                        delimiter: cfg.csv_delimiter,
                    },
                )
                .map(|i| i.series.values)
                .map_err(|e| ExperimentError::Context {
                    what: format!("reading {}", path.display()),
                    source: Box::new(e.into()),
                })
            };
            let t = read(&cfg.fit_time_column)?;
            let v = read(&cfg.fit_value_column)?;
            if t.len() != v.len() {
                return Err(ExperimentError::InvalidInput(
                    "time and value columns differ in length".into(),
                ));
            }
            (t, v, None, cfg.fit_period)
        }
        None => {
            let (t, v, o) = simulate_square_wave(cfg)?;
            (t, v, Some(o), cfg.hold_time)
        }
    };
    let t0 = times[0];
    let t_end = times[times.len() - 1];
    let count = (((t_end - t0) / period) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let params = cfg.model_params().with_delta(cfg.fit_delta);
    let tol = 1e-9 * period;
    let segments = (0..count)
        .map(|s| {
            // Segments share their boundary sample: the state at the switch.
            let a = t0 + s as f64 * period;
            let b = a + period;
            let idx: Vec<usize> = (0..times.len())
                .filter(|&i| times[i] >= a - tol && times[i] <= b + tol)
                .collect();
            let ts: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
            let vs: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let omega = omegas.as_ref().and_then(|o| o.get(s).copied());
            let tau_linear = omega
                .zip(vs.last())
                .and_then(|(w, &n_end)| linear_tau(&params.with_omega(w), n_end));
            SegmentFit {
                index: s,
                t_start: a,
                omega,
                fit: fit_exponential(&ts, &vs).map_err(|e| e.to_string()),
                tau_linear,
            }
        })
        .collect();
    Ok(RelaxFitResult {
        times,
        values,
        segments,
        simulated: omegas.is_some(),
    })
}

pub fn relax_fit_tables(cfg: &ExperimentConfig) -> Result<Tables, ExperimentError> {
    let r = relax_fit_for(cfg)?;
    let mut csv = String::from("segment,t_start,omega,a,b,tau,residual,degenerate,tau_linear,status\n");
    for s in &r.segments {
        let head = format!("{},{},{}", s.index, s.t_start, fmt_opt(s.omega));
        match &s.fit {
            Ok(f) => {
                let _ = writeln!(
                    csv,
                    "{head},{},{},{},{},{},{},ok",
                    f.a,
                    f.b,
                    f.tau,
                    f.residual,
                    f.degenerate,
                    fmt_opt(s.tau_linear)
                );
            }
            Err(e) => {
                let _ = writeln!(
                    csv,
                    "{head},,,,,,{},\"error: {}\"",
                    fmt_opt(s.tau_linear),
                    e.replace('"', "'")
                );
            }
        }
    }
    let mut files = vec![("relax_fit.csv".to_string(), csv)];
    if r.simulated {
        let mut trace = String::from("time,n\n");
        for (t, n) in r.times.iter().zip(&r.values) {
            let _ = writeln!(trace, "{t},{n}");
        }
        files.push(("relax_trace.csv".into(), trace));
    }
    let ok: Vec<&SegmentFit> = r.segments.iter().filter(|s| s.fit.is_ok()).collect();
    let mut summary = vec![format!(
        "{} segments fitted ({} failed), source {}",
        ok.len(),
        r.segments.len() - ok.len(),
        if r.simulated { "simulation" } else { "csv" }
    )];
    for s in ok {
        if let Ok(f) = &s.fit {
            summary.push(format!(
                "segment {}: tau {} (linearized {}), residual {}{}",
                s.index,
                f.tau,
                s.tau_linear.map_or("n/a".to_string(), |t| t.to_string()),
                f.residual,
                if f.degenerate { ", degenerate" } else { "" }
            ));
        }
    }
    Ok(Tables { files, summary })
}
