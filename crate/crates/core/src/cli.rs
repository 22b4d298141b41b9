//! Command implementations behind the `deadbeat` binary.
//!
//! Each command takes a validated [`ExperimentConfig`], writes its files into
//! the configured output directory and returns the paths written plus a
//! short human-readable summary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{parse_config, ConfigError, ExperimentConfig, SweepKind};
use crate::estimator::{det_condition_search, gramian_report, propagate_window};
use crate::harness::{bibo_sweep, cico_run, make_noise, ExperimentSetup};
use crate::numerics::{simulate_plant, simulate_plant_partial, Signal, Trajectory, WindowData};
use crate::observer::{run_full_order, run_reduced_order, ObserverMode, ObserverRun};
use crate::plot::{line_plot, PlotSpec, Series};
use crate::report::{check_csv, fmt_num, observer_csv, reset_trace_csv, sweep_csv, trajectory_csv};
use crate::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_OBSERVABILITY: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Config(Vec<ConfigError>),
    Divergence {
        t: f64,
    },
    Observability {
        t: f64,
    },
    Io {
        path: PathBuf,
        reason: String,
    },
    /// Any other failure of the numerical core; reported as a config problem
    /// because it stems from an inconsistent setup.
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Run(_) => EXIT_CONFIG,
            CliError::Divergence { .. } => EXIT_DIVERGENCE,
            CliError::Observability { .. } => EXIT_OBSERVABILITY,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errors) => {
                write!(f, "invalid config:")?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            CliError::Divergence { t } => write!(f, "plant diverged at t = {t}"),
            CliError::Observability { t } => write!(
                f,
                "ObservabilityError at t = {t}: the window Gramian is singular"
            ),
            CliError::Io { path, reason } => write!(f, "{}: {reason}", path.display()),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { t } => CliError::Divergence { t },
            Error::Observability { t, .. } => CliError::Observability { t },
            other => CliError::Run(other),
        }
    }
}

/// Command-line settings that override the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub plot: bool,
    pub seed: Option<u64>,
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut cfg = parse_config(&text).map_err(CliError::Config)?;
    if let Some(dir) = &overrides.output {
        cfg.output_dir = dir.clone();
    }
    cfg.plot |= overrides.plot;
    if let Some(seed) = overrides.seed {
        cfg.noise.seed = seed;
    }
    Ok(cfg)
}

fn write_file(
    cfg: &ExperimentConfig,
    name: &str,
    contents: &str,
    outcome: &mut Outcome,
) -> Result<(), CliError> {
    let io = |path: &Path, e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(name);
    fs::write(&path, contents).map_err(|e| io(&path, e))?;
    outcome.files.push(path);
    Ok(())
}

fn setup(cfg: &ExperimentConfig) -> Result<ExperimentSetup, CliError> {
    Ok(ExperimentSetup {
        model: cfg.model.clone(),
        x0: cfg.x0.clone(),
        y0: cfg.y0.clone(),
        z0: cfg.z0.clone(),
        u: cfg.input_signal()?,
        r: cfg.r,
        t_end: cfg.t_end,
        tol: cfg.tol,
    })
}

/// Integrates the plant and writes `simulate.csv`. On divergence the rows up
/// to the blow-up are still written before the error is returned.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let u = cfg.input_signal()?;
    let traj = simulate_plant_partial(&cfg.model, &cfg.x0, &cfg.y0, &u, cfg.t_end)?;
    let mut outcome = Outcome::default();
    write_file(cfg, "simulate.csv", &trajectory_csv(&traj), &mut outcome)?;
    if cfg.plot {
        let valid = traj.valid_len();
        let series: Vec<Series> = (0..cfg.model.n())
            .map(|i| {
                Series::new(
                    format!("x{}", i + 1),
                    (0..valid)
                        .map(|j| (traj.x.time(j), traj.x.at(j)[i]))
                        .collect(),
                )
            })
            .collect();
        let spec = PlotSpec {
            title: cfg.model.name(),
            x_label: "t",
            y_label: "x",
            log_y: false,
        };
        write_file(
            cfg,
            "simulate.svg",
            &line_plot(&spec, &series),
            &mut outcome,
        )?;
    }
    if let Some(t) = traj.diverged_at {
        return Err(CliError::Divergence { t });
    }
    outcome.summary.push(format!(
        "simulated {} on [0, {}] with {} samples",
        cfg.model.name(),
        cfg.t_end,
        traj.x.len()
    ));
    Ok(outcome)
}

fn measured(cfg: &ExperimentConfig, truth: &Trajectory) -> Result<Signal, CliError> {
    let noise = make_noise(&cfg.noise, *truth.grid(), cfg.model.k())?;
    Ok(truth.y.add(&noise)?)
}

fn observe(
    cfg: &ExperimentConfig,
    truth: &Trajectory,
    u: &Signal,
) -> Result<ObserverRun, CliError> {
    let y_meas = measured(cfg, truth)?;
    let settings = cfg.observer_settings();
    let mut run = match cfg.mode {
        ObserverMode::ReducedOrder => {
            run_reduced_order(&cfg.model, &y_meas, u, &cfg.z0, &settings)?
        }
        ObserverMode::FullOrder => {
            run_full_order(&cfg.model, &y_meas, u, &cfg.z0, &cfg.w0, &settings)?
        }
    };
    run.attach_truth(truth)?;
    Ok(run)
}

/// Runs plant and observer side by side and writes `observe.csv`.
pub fn cmd_observe(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let u = cfg.input_signal()?;
    let truth = simulate_plant(&cfg.model, &cfg.x0, &cfg.y0, &u, cfg.t_end)?;
    let run = observe(cfg, &truth, &u)?;
    let mut outcome = Outcome::default();
    write_file(
        cfg,
        "observe.csv",
        &observer_csv(&run, &truth)?,
        &mut outcome,
    )?;
    if cfg.plot {
        let errors = run.error_norms(&truth)?;
        let points = errors
            .iter()
            .enumerate()
            .map(|(j, &e)| (run.z.time(j), e))
            .collect();
        let spec = PlotSpec {
            title: "observer error",
            x_label: "t",
            y_label: "|z - x|",
            log_y: true,
        };
        write_file(
            cfg,
            "observe.svg",
            &line_plot(&spec, &[Series::new("|z - x|", points)]),
            &mut outcome,
        )?;
    }
    let last = run.reset_errors.last().copied().unwrap_or(f64::NAN);
    outcome.summary.push(format!(
        "{} resets, last reset error {}",
        run.reset_times.len(),
        fmt_num(last)
    ));
    if !run.observability_failures.is_empty() {
        let times: Vec<String> = run
            .observability_failures
            .iter()
            .map(|t| t.to_string())
            .collect();
        outcome.summary.push(format!(
            "held the estimate at singular windows t = {}",
            times.join(", ")
        ));
    }
    Ok(outcome)
}

/// Checks distinguishability on the first window `[0, r]` and writes `check.csv`.
pub fn cmd_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let u = cfg.input_signal()?;
    let truth = simulate_plant(&cfg.model, &cfg.x0, &cfg.y0, &u, cfg.t_end)?;
    let y_meas = measured(cfg, &truth)?;
    let window = WindowData::from_signals(&y_meas, &u, 0.0, cfg.r)?;
    let bundle = propagate_window(&cfg.model, &window)?;
    let report = gramian_report(&bundle, cfg.tol);
    let mut outcome = Outcome::default();
    outcome.summary.push(format!(
        "window [0, {}]: det Q = {}, min eig = {}, distinguishable = {}",
        cfg.r,
        fmt_num(report.det_q),
        fmt_num(report.min_eig),
        report.distinguishable
    ));
    let certificate = if cfg.model.k() == 1 {
        let c = det_condition_search(&cfg.model, &window)?;
        let times: Vec<String> = c.times.iter().map(|t| format!("{t:.6}")).collect();
        outcome.summary.push(format!(
            "determinant certificate: det = {} at t = [{}]",
            fmt_num(c.det),
            times.join(", ")
        ));
        Some(c)
    } else {
        outcome.summary.push(format!(
            "determinant certificate skipped: it needs a scalar output, model has k = {}",
            cfg.model.k()
        ));
        None
    };
    write_file(
        cfg,
        "check.csv",
        &check_csv(&report, certificate.as_ref()),
        &mut outcome,
    )?;
    Ok(outcome)
}

/// Runs the configured robustness sweep and writes `sweep.csv`
/// (plus `reset_trace.csv` for a converging-input run).
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let Some(sweep) = &cfg.sweep else {
        return Err(CliError::Config(vec![ConfigError {
            field: "sweep".into(),
            line: None,
            reason: "the sweep command needs a [sweep] section".into(),
        }]));
    };
    let setup = setup(cfg)?;
    let mut outcome = Outcome::default();
    match sweep.kind {
        SweepKind::Bibo => {
            let result = bibo_sweep(&setup, &sweep.amplitudes, &cfg.noise)?;
            write_file(cfg, "sweep.csv", &sweep_csv(&result), &mut outcome)?;
            if cfg.plot {
                let points = result
                    .records
                    .iter()
                    .map(|r| (r.delta, r.sup_err))
                    .collect();
                let spec = PlotSpec {
                    title: "bounded-input sweep",
                    x_label: "delta",
                    y_label: "sup |z - x|",
                    log_y: true,
                };
                write_file(
                    cfg,
                    "sweep.svg",
                    &line_plot(&spec, &[Series::new("sup error", points)]),
                    &mut outcome,
                )?;
            }
            for r in &result.records {
                outcome.summary.push(format!(
                    "delta = {}: sup error {}{}",
                    r.delta,
                    fmt_num(r.sup_err),
                    if r.diverged {
                        " (diverged)"
                    } else if r.observability_failed {
                        " (singular window)"
                    } else {
                        ""
                    }
                ));
            }
        }
        SweepKind::Cico => {
            let report = cico_run(&setup, &cfg.noise)?;
            write_file(cfg, "sweep.csv", &sweep_csv(&report.result), &mut outcome)?;
            write_file(
                cfg,
                "reset_trace.csv",
                &reset_trace_csv(&report),
                &mut outcome,
            )?;
            if cfg.plot {
                let spec = PlotSpec {
                    title: "converging-input run",
                    x_label: "t",
                    y_label: "reset error",
                    log_y: true,
                };
                write_file(
                    cfg,
                    "sweep.svg",
                    &line_plot(
                        &spec,
                        &[Series::new("|z - x| at resets", report.reset_trace.clone())],
                    ),
                    &mut outcome,
                )?;
            }
            let record = report.result.records[0];
            outcome.summary.push(format!(
                "last reset error {} vs tail bound {}: {}",
                fmt_num(record.last_reset_err),
                fmt_num(report.tail_bound),
                if report.passed {
                    "converging"
                } else {
                    "not converging"
                }
            ));
        }
    }
    Ok(outcome)
}
