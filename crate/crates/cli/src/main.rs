use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rydberg_reservoir::experiments::{run_command, Command, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "rydberg-rc", version, about = "Rydberg mean-field reservoir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; replaces the configured seed list.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Any configuration key, e.g. `--set hold_time=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Interaction shift V.
    #[arg(long)]
    v: Option<f64>,
    /// Dephasing rate.
    #[arg(long)]
    gamma_d: Option<f64>,
    /// Noise strength D.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stationary-state counts over a detuning x Rabi-frequency grid.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta_min: Option<f64>,
        #[arg(long)]
        delta_max: Option<f64>,
        #[arg(long)]
        delta_points: Option<usize>,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        omega_points: Option<usize>,
    },
    /// Up and down detuning sweeps at fixed Rabi frequency.
    Hysteresis {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cut: CutArgs,
        /// Minimum branch difference reported as hysteresis.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Relaxation times of the stable states along a detuning cut.
    RelaxTimes {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cut: CutArgs,
    },
    /// Prediction error against detuning.
    PredictSweep {
        #[command(flatten)]
        common: Common,
        /// lorenz or csv.
        #[arg(long)]
        task: Option<String>,
        /// Input series for the csv task.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Value column of the csv input.
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        omega: Option<f64>,
        /// Relative modulation depth.
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long)]
        delta_min: Option<f64>,
        #[arg(long)]
        delta_max: Option<f64>,
        #[arg(long)]
        delta_points: Option<usize>,
        /// Comma-separated master seeds.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Exponential fits to each half period of a square-wave response.
    RelaxFit {
        #[command(flatten)]
        common: Common,
        /// Measured trace instead of a simulation.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long)]
        time_column: Option<String>,
        #[arg(long)]
        value_column: Option<String>,
        /// Segment length of the measured trace.
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long)]
        periods: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct CutArgs {
    /// Rabi frequency of the cut.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

type Overrides = Vec<(&'static str, Option<String>)>;

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

impl CutArgs {
    fn overrides(&self) -> Overrides {
        vec![
            ("cut_omega", s(&self.omega)),
            ("cut_delta_min", s(&self.delta_min)),
            ("cut_delta_max", s(&self.delta_max)),
            ("cut_delta_points", s(&self.points)),
        ]
    }
}

impl Cmd {
    fn split(&self) -> (Command, &Common, Overrides) {
        match self {
            Cmd::PhaseDiagram {
                common,
                delta_min,
                delta_max,
                delta_points,
                omega_min,
                omega_max,
                omega_points,
            } => (
                Command::PhaseDiagram,
                common,
                vec![
                    ("phase_delta_min", s(delta_min)),
                    ("phase_delta_max", s(delta_max)),
                    ("phase_delta_points", s(delta_points)),
                    ("phase_omega_min", s(omega_min)),
                    ("phase_omega_max", s(omega_max)),
                    ("phase_omega_points", s(omega_points)),
                ],
            ),
            Cmd::Hysteresis { common, cut, threshold } => {
                let mut o = cut.overrides();
                o.push(("hysteresis_threshold", s(threshold)));
                (Command::Hysteresis, common, o)
            }
            Cmd::RelaxTimes { common, cut } => (Command::RelaxTimes, common, cut.overrides()),
            Cmd::PredictSweep {
                common,
                task,
                csv,
                column,
                omega,
                depth,
                delta_min,
                delta_max,
                delta_points,
                seeds,
            } => (
                Command::PredictSweep,
                common,
                vec![
                    ("task", task.clone().or_else(|| csv.as_ref().map(|_| "csv".into()))),
                    ("csv_path", p(csv)),
                    ("csv_column", column.clone()),
                    ("omega", s(omega)),
                    ("depth", s(depth)),
                    ("delta_min", s(delta_min)),
                    ("delta_max", s(delta_max)),
                    ("delta_points", s(delta_points)),
                    ("seeds", seeds.clone()),
                ],
            ),
            Cmd::RelaxFit {
                common,
                input,
                time_column,
                value_column,
                period,
                omega,
                delta,
                depth,
                periods,
            } => (
                Command::RelaxFit,
                common,
                vec![
                    ("fit_input", p(input)),
                    ("fit_time_column", time_column.clone()),
                    ("fit_value_column", value_column.clone()),
                    ("fit_period", s(period)),
                    ("omega", s(omega)),
                    ("fit_delta", s(delta)),
                    ("fit_depth", s(depth)),
                    ("fit_periods", s(periods)),
                ],
            ),
        }
    }
}

/// Defaults, then the config file, then `--set`, then named flags.
fn resolve(common: &Common, specific: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
        cfg.set(k.trim(), v)?;
    }
    let named = [
        ("v", s(&common.v)),
        ("gamma_d", s(&common.gamma_d)),
        ("d", s(&common.noise)),
        ("out_dir", p(&common.out)),
        ("seeds", s(&common.seed)),
        ("workers", s(&common.workers)),
    ];
    for (key, value) in specific.into_iter().chain(named) {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (cmd, common, overrides) = cli.command.split();
    let cfg = resolve(common, overrides)?;
    let out = run_command(cmd, &cfg).with_context(|| format!("{} failed", cmd.name()))?;
    for line in &out.summary {
        println!("{line}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
