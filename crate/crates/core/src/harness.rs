//! Measurement-noise experiments for the reduced-order observer.
//!
//! The observer only ever sees `ỹ = y + e`. Three experiments probe how
//! the estimation error responds to `e`:
//!
//! * [`bibo_sweep`]: bounded noise of growing amplitude, bounded error;
//! * [`small_error_margin`]: the largest amplitude keeping the error below `ε`;
//! * [`cico_run`]: decaying noise, decaying error.
//!
//! Every run is deterministic. Sweep rows execute in parallel and are
//! merged by row index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::numerics::{simulate_plant, SampleGrid, Signal, Trajectory};
use crate::observer::{reset_error_trace, run_reduced_order, ObserverRun, ObserverSettings};

/// The tail of a converging run must sit within this factor of the noise
/// level over the final window.
pub const CICO_TAIL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    None,
    /// Independent draws from `[−δ, δ)` per node, from a seeded ChaCha8 stream.
    Uniform,
    /// `δ sin(ωt)`
    Sinusoid,
    /// `δ e^{−λt} sin(ωt)`
    DecayingSinusoid,
}

/// Measurement error `e(t)` on the output channel. For `k > 1` outputs each
/// channel uses amplitude `δ/√k`, so `|e(t)| ≤ δ` in the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    /// 1/s
    pub decay: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform(amplitude: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Uniform,
            amplitude,
            seed,
            ..Self::default()
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: NoiseKind::Sinusoid,
            amplitude,
            frequency,
            ..Self::default()
        }
    }

    pub fn decaying_sinusoid(amplitude: f64, frequency: f64, decay: f64) -> Self {
        Self {
            kind: NoiseKind::DecayingSinusoid,
            amplitude,
            frequency,
            decay,
            ..Self::default()
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Precondition(format!(
                "noise amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.frequency.is_finite() {
            return Err(Error::Precondition("noise frequency must be finite".into()));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Precondition(format!(
                "noise decay must be finite and >= 0, got {}",
                self.decay
            )));
        }
        Ok(())
    }
}

/// Samples the measurement error on `grid` for a `k`-dimensional output.
pub fn make_noise(spec: &NoiseSpec, grid: SampleGrid, k: usize) -> Result<Signal> {
    spec.validate()?;
    let amp = if k > 1 {
        spec.amplitude / (k as f64).sqrt()
    } else {
        spec.amplitude
    };
    match spec.kind {
        NoiseKind::None => Ok(Signal::zeros(grid, k)),
        NoiseKind::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let values = (0..grid.count() * k)
                .map(|_| amp * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            Signal::new(grid, k, values)
        }
        NoiseKind::Sinusoid => {
            Signal::from_fn(grid, k, |t| vec![amp * (spec.frequency * t).sin(); k])
        }
        NoiseKind::DecayingSinusoid => Signal::from_fn(grid, k, |t| {
            vec![amp * (-spec.decay * t).exp() * (spec.frequency * t).sin(); k]
        }),
    }
}

/// Everything needed to run the plant and the observer side by side.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub model: SystemModel,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub z0: Vec<f64>,
    /// Known input on the experiment grid.
    pub u: Signal,
    pub r: f64,
    pub t_end: f64,
    pub tol: f64,
}

impl ExperimentSetup {
    pub fn settings(&self) -> ObserverSettings {
        ObserverSettings::new(self.r, self.tol)
    }

    pub fn simulate_truth(&self) -> Result<Trajectory> {
        simulate_plant(&self.model, &self.x0, &self.y0, &self.u, self.t_end)
    }
}

/// Metrics of one noisy observer run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub delta: f64,
    pub seed: u64,
    /// `sup_{t ≥ r} |z − x|`
    pub sup_err: f64,
    /// `sup |z − x|` over the last window `[T − r, T]`.
    pub final_window_err: f64,
    /// `|z − x|` at the last reset instant.
    pub last_reset_err: f64,
    /// `sup |e|` over the last window.
    pub final_window_noise: f64,
    pub diverged: bool,
    pub observability_failed: bool,
}

impl RunRecord {
    fn flagged(delta: f64, seed: u64, diverged: bool, observability_failed: bool) -> Self {
        Self {
            delta,
            seed,
            sup_err: f64::NAN,
            final_window_err: f64::NAN,
            last_reset_err: f64::NAN,
            final_window_noise: f64::NAN,
            diverged,
            observability_failed,
        }
    }

    pub fn failed(&self) -> bool {
        self.diverged || self.observability_failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub model: String,
    pub r: f64,
    pub h_s: f64,
    pub seeds: Vec<u64>,
    pub records: Vec<RunRecord>,
}

/// A noisy run together with the raw observer output.
#[derive(Debug, Clone)]
pub struct NoisyRun {
    pub record: RunRecord,
    pub run: Option<ObserverRun>,
    pub noise: Signal,
}

fn sup_from(values: &[f64], grid: &SampleGrid, t_from: f64) -> f64 {
    let start = ((t_from - grid.t0()) / grid.h_s()).round().max(0.0) as usize;
    values[start.min(values.len())..]
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Runs the reduced-order observer on `y + e` and measures it against `truth`.
/// Divergence and observability failures are flagged in the record.
pub fn run_noisy(
    setup: &ExperimentSetup,
    truth: &Trajectory,
    spec: &NoiseSpec,
) -> Result<NoisyRun> {
    let grid = *truth.y.grid();
    let noise = make_noise(spec, grid, setup.model.k())?;
    let y_meas = truth.y.add(&noise)?;
    let run = match run_reduced_order(
        &setup.model,
        &y_meas,
        &setup.u,
        &setup.z0,
        &setup.settings(),
    ) {
        Ok(run) => run,
        Err(Error::Divergence { .. }) => {
            return Ok(NoisyRun {
                record: RunRecord::flagged(spec.amplitude, spec.seed, true, false),
                run: None,
                noise,
            })
        }
        Err(Error::Observability { .. }) => {
            return Ok(NoisyRun {
                record: RunRecord::flagged(spec.amplitude, spec.seed, false, true),
                run: None,
                noise,
            })
        }
        Err(e) => return Err(e),
    };
    let errors = run.error_norms(truth)?;
    let t_last = grid.t_end();
    let last_reset_err = reset_error_trace(&run, truth)?
        .last()
        .map_or(f64::NAN, |&(_, e)| e);
    let record = RunRecord {
        delta: spec.amplitude,
        seed: spec.seed,
        sup_err: sup_from(&errors, &grid, grid.t0() + setup.r),
        final_window_err: sup_from(&errors, &grid, t_last - setup.r),
        last_reset_err,
        final_window_noise: sup_from(&noise.norms(), &grid, t_last - setup.r),
        diverged: false,
        observability_failed: false,
    };
    Ok(NoisyRun {
        record,
        run: Some(run),
        noise,
    })
}

/// Runs the noisy observer once per amplitude in `amplitudes`, with every
/// other noise parameter taken from `template`.
pub fn bibo_sweep(
    setup: &ExperimentSetup,
    amplitudes: &[f64],
    template: &NoiseSpec,
) -> Result<ExperimentResult> {
    if amplitudes.is_empty() {
        return Err(Error::Precondition("amplitude list is empty".into()));
    }
    let truth = setup.simulate_truth()?;
    let records = amplitudes
        .par_iter()
        .map(|&delta| run_noisy(setup, &truth, &template.with_amplitude(delta)).map(|r| r.record))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        model: setup.model.name().to_string(),
        r: setup.r,
        h_s: setup.u.grid().h_s(),
        seeds: vec![template.seed],
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// Largest tested amplitude whose worst run stayed below `ε`; an
    /// empirical lower bound, not a certificate.
    pub delta: f64,
    pub diagnostic: Option<String>,
    pub evaluations: usize,
}

/// Bisection on the noise amplitude in `[0, ceiling]` for the largest `δ`
/// such that every noise shape in `family` (rescaled to `δ`) keeps
/// `sup_{t ≥ r} |z − x| < ε`.
pub fn small_error_margin(
    setup: &ExperimentSetup,
    epsilon: f64,
    family: &[NoiseSpec],
    ceiling: f64,
    iterations: usize,
) -> Result<MarginReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if family.is_empty() || !(ceiling > 0.0) {
        return Err(Error::Precondition(
            "need a non-empty noise family and a positive ceiling".into(),
        ));
    }
    let truth = setup.simulate_truth()?;
    let mut evaluations = 0;
    let mut passes = |delta: f64| -> Result<bool> {
        evaluations += 1;
        let worst = family
            .par_iter()
            .map(|spec| {
                run_noisy(setup, &truth, &spec.with_amplitude(delta)).map(|r| {
                    if r.record.failed() {
                        f64::INFINITY
                    } else {
                        r.record.sup_err
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(worst < epsilon)
    };

    if !passes(0.0)? {
        return Ok(MarginReport {
            delta: 0.0,
            diagnostic: Some(format!(
                "the noiseless run already violates epsilon = {epsilon}"
            )),
            evaluations,
        });
    }
    if passes(ceiling)? {
        return Ok(MarginReport {
            delta: ceiling,
            diagnostic: None,
            evaluations,
        });
    }
    let (mut lo, mut hi) = (0.0, ceiling);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let diagnostic = (lo == 0.0)
        .then(|| format!("even the smallest tested amplitude {hi:e} violates epsilon = {epsilon}"));
    Ok(MarginReport {
        delta: lo,
        diagnostic,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CicoReport {
    pub result: ExperimentResult,
    /// `(τᵢ, |z(τᵢ) − x(τᵢ)|)` for every reset.
    pub reset_trace: Vec<(f64, f64)>,
    /// `CICO_TAIL_FACTOR × sup |e|` over the final window.
    pub tail_bound: f64,
    pub passed: bool,
}

/// Runs the observer under decaying noise and checks that the last reset
/// error sits below [`CICO_TAIL_FACTOR`] times the noise left in the final window.
pub fn cico_run(setup: &ExperimentSetup, spec: &NoiseSpec) -> Result<CicoReport> {
    if spec.kind != NoiseKind::DecayingSinusoid || !(spec.decay > 0.0) {
        return Err(Error::Precondition(
            "a converging-input run needs decaying-sinusoid noise with decay > 0".into(),
        ));
    }
    let truth = setup.simulate_truth()?;
    let noisy = run_noisy(setup, &truth, spec)?;
    let reset_trace = match &noisy.run {
        Some(run) => reset_error_trace(run, &truth)?,
        None => Vec::new(),
    };
    let record = noisy.record;
    let tail_bound = CICO_TAIL_FACTOR * record.final_window_noise;
    let passed = !record.failed() && record.last_reset_err <= tail_bound;
    Ok(CicoReport {
        result: ExperimentResult {
            model: setup.model.name().to_string(),
            r: setup.r,
            h_s: setup.u.grid().h_s(),
            seeds: vec![spec.seed],
            records: vec![record],
        },
        reset_trace,
        tail_bound,
        passed,
    })
}
