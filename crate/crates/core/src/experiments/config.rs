use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::ExperimentError;
use crate::model::{sweep_grid, ModelParams};
use crate::pipeline::{DatasetLayout, FilterSpec, PipelineSettings};
use crate::signals::{CsvOptions, LorenzParams};

/// Input series for the prediction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Lorenz,
    Csv,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Lorenz => "lorenz",
            Task::Csv => "csv",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lorenz" => Ok(Task::Lorenz),
            "csv" => Ok(Task::Csv),
            _ => Err(format!("unknown task {s:?} (expected lorenz or csv)")),
        }
    }
}

/// Every setting of every command.
///
/// The text form is one `key = value` per line; blank lines and lines
/// starting with `#` are ignored. Unknown and repeated keys are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub omega: f64,
    /// Relative modulation depth δΩ/Ω.
    pub depth: f64,
    pub gamma: f64,
    pub gamma_d: f64,
    pub v: f64,
    pub d: f64,

    pub hold_time: f64,
    pub dt: f64,
    pub samples_per_symbol: usize,
    pub warmup_symbols: usize,
    pub n0: f64,
    pub relax_tol: f64,

    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub seeds: Vec<u64>,
    pub task: Task,
    pub csv_path: Option<PathBuf>,
    pub csv_column: String,
    pub csv_delimiter: u8,

    pub lorenz_sigma: f64,
    pub lorenz_rho: f64,
    pub lorenz_beta: f64,
    pub lorenz_dt: f64,
    pub lorenz_steps: usize,
    pub lorenz_transient: f64,
    pub lorenz_initial: [f64; 3],

    pub window_m: usize,
    pub stride: usize,
    pub filter_window: usize,
    pub filter_order: usize,
    pub train_fraction: f64,
    pub ridge_lambda: f64,

    pub phase_delta_min: f64,
    pub phase_delta_max: f64,
    pub phase_delta_points: usize,
    pub phase_omega_min: f64,
    pub phase_omega_max: f64,
    pub phase_omega_points: usize,

    pub cut_omega: f64,
    pub cut_delta_min: f64,
    pub cut_delta_max: f64,
    pub cut_delta_points: usize,
    pub hysteresis_threshold: f64,

    pub fit_delta: f64,
    pub fit_depth: f64,
    pub fit_periods: usize,
    pub fit_input: Option<PathBuf>,
    pub fit_time_column: String,
    pub fit_value_column: String,
    pub fit_period: f64,

    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lorenz = LorenzParams::default();
        Self {
            omega: 1.1,
            depth: 0.1,
            gamma: 1.0,
            gamma_d: 10.0,
            v: 100.0,
            d: 1e-4,

            hold_time: 20.0,
            dt: 0.1,
            samples_per_symbol: 20,
            warmup_symbols: 10,
            n0: 0.0,
            relax_tol: 1e-10,

            delta_min: 5.0,
            delta_max: 15.0,
            delta_points: 21,
            seeds: vec![1, 2, 3],
            task: Task::Lorenz,
            csv_path: None,
            csv_column: "value".into(),
            csv_delimiter: b',',

            lorenz_sigma: lorenz.sigma,
            lorenz_rho: lorenz.rho,
            lorenz_beta: lorenz.beta,
            lorenz_dt: lorenz.dt,
            lorenz_steps: lorenz.steps,
            lorenz_transient: lorenz.transient,
            lorenz_initial: lorenz.initial,

            window_m: 200,
            stride: 20,
            filter_window: 10,
            filter_order: 3,
            train_fraction: 0.7,
            ridge_lambda: 0.0,

            phase_delta_min: 0.0,
            phase_delta_max: 30.0,
            phase_delta_points: 200,
            phase_omega_min: 0.5,
            phase_omega_max: 3.0,
            phase_omega_points: 200,

            cut_omega: 1.21,
            cut_delta_min: 0.0,
            cut_delta_max: 30.0,
            cut_delta_points: 400,
            hysteresis_threshold: 1e-6,

            fit_delta: 11.0,
            fit_depth: 0.02,
            fit_periods: 4,
            fit_input: None,
            fit_time_column: "time".into(),
            fit_value_column: "value".into(),
            fit_period: 40.0,

            workers: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse::<T>().map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_delimiter(value: &str) -> Result<u8, String> {
    match value {
        "tab" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() && s != "\"" => Ok(s.as_bytes()[0]),
        _ => Err(format!(
            "csv_delimiter: expected one ASCII character or \"tab\", got {value:?}"
        )),
    }
}

fn show_delimiter(d: u8) -> String {
    if d == b'\t' {
        "tab".into()
    } else {
        (d as char).to_string()
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key {
                "omega" => self.omega = parse_num(key, v)?,
                "depth" => self.depth = parse_num(key, v)?,
                "gamma" => self.gamma = parse_num(key, v)?,
                "gamma_d" => self.gamma_d = parse_num(key, v)?,
                "v" => self.v = parse_num(key, v)?,
                "d" => self.d = parse_num(key, v)?,
                "hold_time" => self.hold_time = parse_num(key, v)?,
                "dt" => self.dt = parse_num(key, v)?,
                "samples_per_symbol" => self.samples_per_symbol = parse_num(key, v)?,
                "warmup_symbols" => self.warmup_symbols = parse_num(key, v)?,
                "n0" => self.n0 = parse_num(key, v)?,
                "relax_tol" => self.relax_tol = parse_num(key, v)?,
                "delta_min" => self.delta_min = parse_num(key, v)?,
                "delta_max" => self.delta_max = parse_num(key, v)?,
                "delta_points" => self.delta_points = parse_num(key, v)?,
                "seeds" => self.seeds = parse_list(key, v)?,
                "task" => self.task = v.parse()?,
                "csv_path" => self.csv_path = parse_path(v),
                "csv_column" => self.csv_column = v.to_string(),
                "csv_delimiter" => self.csv_delimiter = parse_delimiter(v)?,
                "lorenz_sigma" => self.lorenz_sigma = parse_num(key, v)?,
                "lorenz_rho" => self.lorenz_rho = parse_num(key, v)?,
                "lorenz_beta" => self.lorenz_beta = parse_num(key, v)?,
                "lorenz_dt" => self.lorenz_dt = parse_num(key, v)?,
                "lorenz_steps" => self.lorenz_steps = parse_num(key, v)?,
                "lorenz_transient" => self.lorenz_transient = parse_num(key, v)?,
                "lorenz_initial" => {
                    let xs: Vec<f64> = parse_list(key, v)?;
                    self.lorenz_initial = xs
                        .try_into()
                        .map_err(|_| "lorenz_initial: expected three values x,y,z".to_string())?;
                }
                "window_m" => self.window_m = parse_num(key, v)?,
                "stride" => self.stride = parse_num(key, v)?,
                "filter_window" => self.filter_window = parse_num(key, v)?,
                "filter_order" => self.filter_order = parse_num(key, v)?,
                "train_fraction" => self.train_fraction = parse_num(key, v)?,
                "ridge_lambda" => self.ridge_lambda = parse_num(key, v)?,
                "phase_delta_min" => self.phase_delta_min = parse_num(key, v)?,
                "phase_delta_max" => self.phase_delta_max = parse_num(key, v)?,
                "phase_delta_points" => self.phase_delta_points = parse_num(key, v)?,
                "phase_omega_min" => self.phase_omega_min = parse_num(key, v)?,
                "phase_omega_max" => self.phase_omega_max = parse_num(key, v)?,
                "phase_omega_points" => self.phase_omega_points = parse_num(key, v)?,
                "cut_omega" => self.cut_omega = parse_num(key, v)?,
                "cut_delta_min" => self.cut_delta_min = parse_num(key, v)?,
                "cut_delta_max" => self.cut_delta_max = parse_num(key, v)?,
                "cut_delta_points" => self.cut_delta_points = parse_num(key, v)?,
                "hysteresis_threshold" => self.hysteresis_threshold = parse_num(key, v)?,
                "fit_delta" => self.fit_delta = parse_num(key, v)?,
                "fit_depth" => self.fit_depth = parse_num(key, v)?,
                "fit_periods" => self.fit_periods = parse_num(key, v)?,
                "fit_input" => self.fit_input = parse_path(v),
                "fit_time_column" => self.fit_time_column = v.to_string(),
                "fit_value_column" => self.fit_value_column = v.to_string(),
                "fit_period" => self.fit_period = parse_num(key, v)?,
                "workers" => self.workers = parse_num(key, v)?,
                "out_dir" => self.out_dir = PathBuf::from(v),
                _ => return Err(format!("unknown key {key:?}")),
            }
            Ok(())
        })();
        r.map_err(ExperimentError::Config)
    }

    /// All settings as `(key, value)` pairs in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("omega", self.omega.to_string()),
            ("depth", self.depth.to_string()),
            ("gamma", self.gamma.to_string()),
            ("gamma_d", self.gamma_d.to_string()),
            ("v", self.v.to_string()),
            ("d", self.d.to_string()),
            ("hold_time", self.hold_time.to_string()),
            ("dt", self.dt.to_string()),
            ("samples_per_symbol", self.samples_per_symbol.to_string()),
            ("warmup_symbols", self.warmup_symbols.to_string()),
            ("n0", self.n0.to_string()),
            ("relax_tol", self.relax_tol.to_string()),
            ("delta_min", self.delta_min.to_string()),
            ("delta_max", self.delta_max.to_string()),
            ("delta_points", self.delta_points.to_string()),
            ("seeds", join(&self.seeds)),
            ("task", self.task.label().to_string()),
            ("csv_path", show_path(&self.csv_path)),
            ("csv_column", self.csv_column.clone()),
            ("csv_delimiter", show_delimiter(self.csv_delimiter)),
            ("lorenz_sigma", self.lorenz_sigma.to_string()),
            ("lorenz_rho", self.lorenz_rho.to_string()),
            ("lorenz_beta", self.lorenz_beta.to_string()),
            ("lorenz_dt", self.lorenz_dt.to_string()),
            ("lorenz_steps", self.lorenz_steps.to_string()),
            ("lorenz_transient", self.lorenz_transient.to_string()),
            ("lorenz_initial", join(&self.lorenz_initial)),
            ("window_m", self.window_m.to_string()),
            ("stride", self.stride.to_string()),
            ("filter_window", self.filter_window.to_string()),
            ("filter_order", self.filter_order.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("ridge_lambda", self.ridge_lambda.to_string()),
            ("phase_delta_min", self.phase_delta_min.to_string()),
            ("phase_delta_max", self.phase_delta_max.to_string()),
            ("phase_delta_points", self.phase_delta_points.to_string()),
            ("phase_omega_min", self.phase_omega_min.to_string()),
            ("phase_omega_max", self.phase_omega_max.to_string()),
            ("phase_omega_points", self.phase_omega_points.to_string()),
            ("cut_omega", self.cut_omega.to_string()),
            ("cut_delta_min", self.cut_delta_min.to_string()),
            ("cut_delta_max", self.cut_delta_max.to_string()),
            ("cut_delta_points", self.cut_delta_points.to_string()),
            ("hysteresis_threshold", self.hysteresis_threshold.to_string()),
            ("fit_delta", self.fit_delta.to_string()),
            ("fit_depth", self.fit_depth.to_string()),
            ("fit_periods", self.fit_periods.to_string()),
            ("fit_input", show_path(&self.fit_input)),
            ("fit_time_column", self.fit_time_column.clone()),
            ("fit_value_column", self.fit_value_column.clone()),
            ("fit_period", self.fit_period.to_string()),
            ("workers", self.workers.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }

    /// Reads settings on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("line {lineno}: expected key = value")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ExperimentError::Config(format!("line {lineno}: repeated key {key:?}")));
            }
            cfg.set(key, value)
                .map_err(|e| ExperimentError::Config(format!("line {lineno}: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ExperimentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            omega: self.omega,
            delta: 0.0,
            gamma: self.gamma,
            gamma_d: self.gamma_d,
            v: self.v,
            d: self.d,
        }
    }

    pub fn lorenz_params(&self) -> LorenzParams {
        LorenzParams {
            sigma: self.lorenz_sigma,
            rho: self.lorenz_rho,
            beta: self.lorenz_beta,
            dt: self.lorenz_dt,
            steps: self.lorenz_steps,
            initial: self.lorenz_initial,
            transient: self.lorenz_transient,
        }
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            value_column: self.csv_column.clone(),
            delimiter: self.csv_delimiter,
        }
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            filter: FilterSpec {
                window: self.filter_window,
                order: self.filter_order,
            },
            layout: DatasetLayout {
                m: self.window_m,
                stride: self.stride,
                samples_per_symbol: self.samples_per_symbol,
            },
            train_fraction: self.train_fraction,
            ridge_lambda: self.ridge_lambda,
        }
    }

    /// Checks every setting, naming the first offending key.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        self.model_params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let finite = [
            ("omega", self.omega),
            ("depth", self.depth),
            ("hold_time", self.hold_time),
            ("dt", self.dt),
            ("delta_min", self.delta_min),
            ("delta_max", self.delta_max),
            ("phase_delta_min", self.phase_delta_min),
            ("phase_delta_max", self.phase_delta_max),
            ("phase_omega_min", self.phase_omega_min),
            ("phase_omega_max", self.phase_omega_max),
            ("cut_omega", self.cut_omega),
            ("cut_delta_min", self.cut_delta_min),
            ("cut_delta_max", self.cut_delta_max),
            ("fit_delta", self.fit_delta),
            ("fit_depth", self.fit_depth),
            ("fit_period", self.fit_period),
            ("relax_tol", self.relax_tol),
            ("hysteresis_threshold", self.hysteresis_threshold),
            ("ridge_lambda", self.ridge_lambda),
        ];
        if let Some((k, _)) = finite.iter().find(|(_, x)| !x.is_finite()) {
            return bad(format!("{k} must be finite"));
        }
        if self.depth < 0.0 || self.fit_depth < 0.0 {
            return bad("depth and fit_depth must be >= 0".into());
        }
        if self.hold_time <= 0.0 || self.dt <= 0.0 || self.dt > self.hold_time / 10.0 {
            return bad("need hold_time > 0 and 0 < dt <= hold_time/10".into());
        }
        if self.samples_per_symbol == 0 {
            return bad("samples_per_symbol must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.n0) {
            return bad("n0 must lie in [0, 1]".into());
        }
        if self.relax_tol <= 0.0 || self.hysteresis_threshold < 0.0 || self.ridge_lambda < 0.0 {
            return bad("relax_tol must be > 0; hysteresis_threshold and ridge_lambda >= 0".into());
        }
        let ranges = [
            ("delta", self.delta_min, self.delta_max, self.delta_points),
            (
                "phase_delta",
                self.phase_delta_min,
                self.phase_delta_max,
                self.phase_delta_points,
            ),
            (
                "phase_omega",
                self.phase_omega_min,
                self.phase_omega_max,
                self.phase_omega_points,
            ),
        ];
        for (name, lo, hi, points) in ranges {
            if points == 0 || lo > hi || (points == 1 && lo != hi) {
                return bad(format!(
                    "{name} range needs {name}_min <= {name}_max and >= 1 point (exactly 1 only when min = max)"
                ));
            }
        }
        if self.cut_delta_points < 2 && self.cut_delta_min != self.cut_delta_max {
            return bad("cut_delta_points must be >= 2".into());
        }
        if self.phase_omega_min < 0.0 || self.cut_omega < 0.0 {
            return bad("Rabi frequencies must be >= 0".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        if self.task == Task::Csv && self.csv_path.is_none() {
            return bad("task = csv needs csv_path".into());
        }
        self.lorenz_params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.pipeline_settings()
            .filter
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.window_m == 0 || self.stride == 0 {
            return bad("window_m and stride must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)".into());
        }
        if self.fit_periods == 0 || self.fit_period <= 0.0 {
            return bad("fit_periods must be >= 1 and fit_period > 0".into());
        }
        Ok(())
    }

    /// Detunings of the prediction sweep.
    pub fn predict_grid(&self) -> Vec<f64> {
        linspace(self.delta_min, self.delta_max, self.delta_points)
    }
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    sweep_grid(lo, hi, points)
}
