//! Hybrid dead-beat observers.
//!
//! Between reset instants the estimate flows with the model's own
//! dynamics driven by the measured output. Every `r` seconds the estimate
//! jumps to the dead-beat map evaluated on the last window of measurements,
//! which (without noise) is the exact state. Reset instants are kept on
//! integer grid indices so they never drift.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimator::operator_p;
use crate::model::SystemModel;
use crate::numerics::{rk4_step, steps_in, Signal, StagePoint, Trajectory, WindowData};

/// What to do when a window does not distinguish the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Stop the run with [`Error::Observability`].
    #[default]
    Abort,
    /// Skip the reset and keep the flowing estimate.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverMode {
    FullOrder,
    ReducedOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverSettings {
    /// Reset horizon; a whole number of macro steps.
    pub r: f64,
    /// Gramian pivot tolerance passed to the dead-beat map.
    pub tol: f64,
    pub on_failure: FailurePolicy,
}

impl ObserverSettings {
    pub fn new(r: f64, tol: f64) -> Self {
        Self {
            r,
            tol,
            on_failure: FailurePolicy::Abort,
        }
    }

    pub fn with_policy(mut self, on_failure: FailurePolicy) -> Self {
        self.on_failure = on_failure;
        self
    }
}

/// Live state of an observer between two grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub z: Vec<f64>,
    /// Output estimate; full-order observer only.
    pub w: Option<Vec<f64>>,
    /// Start of the current epoch.
    pub tau_i: f64,
    /// Number of resets performed so far.
    pub epoch: usize,
    /// Grid node where the measurement window of the current epoch begins.
    pub window_start: usize,
    pub mode: ObserverMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRun {
    pub mode: ObserverMode,
    pub z: Signal,
    pub w: Option<Signal>,
    /// `τ₀ + i·r` for every reset performed (including failed ones).
    pub reset_times: Vec<f64>,
    /// Grid node of each entry in `reset_times`.
    pub reset_nodes: Vec<usize>,
    /// `|z(τᵢ) − x(τᵢ)|`, filled by [`ObserverRun::attach_truth`].
    pub reset_errors: Vec<f64>,
    /// Reset instants whose window failed the Gramian test (hold policy).
    pub observability_failures: Vec<f64>,
}

impl ObserverRun {
    pub fn attach_truth(&mut self, truth: &Trajectory) -> Result<()> {
        self.reset_errors = reset_error_trace(self, truth)?
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        Ok(())
    }

    /// `|z(t) − x(t)|` at every grid node.
    pub fn error_norms(&self, truth: &Trajectory) -> Result<Vec<f64>> {
        check_shared_grid(&self.z, &truth.x)?;
        Ok((0..self.z.len())
            .map(|j| distance(self.z.at(j), truth.x.at(j)))
            .collect())
    }

    /// `|w(t) − y(t)|` at every grid node, for full-order runs.
    pub fn output_error_norms(&self, truth: &Trajectory) -> Result<Option<Vec<f64>>> {
        let Some(w) = &self.w else { return Ok(None) };
        check_shared_grid(w, &truth.y)?;
        Ok(Some(
            (0..w.len())
                .map(|j| distance(w.at(j), truth.y.at(j)))
                .collect(),
        ))
    }

    /// Whether node `j` is one of the reset instants.
    pub fn is_reset_node(&self, j: usize) -> bool {
        self.reset_nodes.binary_search(&j).is_ok()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_shared_grid(a: &Signal, b: &Signal) -> Result<()> {
    let (ga, gb) = (a.grid(), b.grid());
    if ga.t0() != gb.t0() || ga.h_s() != gb.h_s() || ga.count() > gb.count() {
        return Err(Error::Grid(
            "observer run and truth do not share a grid".into(),
        ));
    }
    Ok(())
}

/// Post-reset error `(τᵢ, |z(τᵢ) − x(τᵢ)|)` at every reset instant.
pub fn reset_error_trace(run: &ObserverRun, truth: &Trajectory) -> Result<Vec<(f64, f64)>> {
    check_shared_grid(&run.z, &truth.x)?;
    Ok(run
        .reset_times
        .iter()
        .zip(&run.reset_nodes)
        .map(|(&t, &j)| (t, distance(run.z.at(j), truth.x.at(j))))
        .collect())
}

struct Plan {
    window_steps: usize,
    total_steps: usize,
}

fn plan(
    model: &SystemModel,
    y_meas: &Signal,
    u: &Signal,
    z0: &[f64],
    settings: &ObserverSettings,
) -> Result<Plan> {
    if y_meas.dim() != model.k() || u.dim() != model.m() || z0.len() != model.n() {
        return Err(Error::Domain(format!(
            "observer for `{}` needs (y, u, z0) of dims ({}, {}, {}), got ({}, {}, {})",
            model.name(),
            model.k(),
            model.m(),
            model.n(),
            y_meas.dim(),
            u.dim(),
            z0.len()
        )));
    }
    let (gy, gu) = (y_meas.grid(), u.grid());
    if gy.t0() != gu.t0() || gy.h_s() != gu.h_s() || gu.count() < gy.count() {
        return Err(Error::Grid(
            "measured output and input must share one grid".into(),
        ));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }
    let window_steps = steps_in(settings.r, gy.h_s())?;
    if window_steps < 2 || window_steps % 2 != 0 {
        return Err(Error::Grid(format!(
            "horizon r = {} must be a positive whole number of macro steps {}",
            settings.r,
            gy.macro_step()
        )));
    }
    let total_steps = gy.count() - 1;
    if total_steps % 2 != 0 {
        return Err(Error::Grid(
            "measurement grid must span a whole number of macro steps".into(),
        ));
    }
    Ok(Plan {
        window_steps,
        total_steps,
    })
}

/// Evaluates the dead-beat map on the window ending at `node`. `Ok(None)`
/// means the window failed the observability test under the hold policy.
#[allow(clippy::too_many_arguments)]
fn reset_value(
    model: &SystemModel,
    y_meas: &Signal,
    u: &Signal,
    state: &mut ObserverState,
    node: usize,
    plan: &Plan,
    settings: &ObserverSettings,
    run: &mut ObserverRun,
) -> Result<Option<Vec<f64>>> {
    let tau = y_meas.grid().t0() + (state.epoch + 1) as f64 * settings.r;
    let window = WindowData::new(
        y_meas.slice(state.window_start, plan.window_steps)?,
        u.slice(state.window_start, plan.window_steps)?,
    )?;
    state.epoch += 1;
    state.tau_i = tau;
    state.window_start = node;
    run.reset_times.push(tau);
    run.reset_nodes.push(node);
    match operator_p(model, &window, settings.tol) {
        Ok(z) => Ok(Some(z.as_slice().to_vec())),
        Err(Error::Observability { pivot, tol, .. }) => match settings.on_failure {
            FailurePolicy::Abort => Err(Error::Observability { t: tau, pivot, tol }),
            FailurePolicy::Hold => {
                run.observability_failures.push(tau);
                Ok(None)
            }
        },
        Err(e) => Err(e),
    }
}

/// Reduced-order observer: `z' = A(ỹ, u) z + b(ỹ, u)` with
/// `z(τᵢ₊₁) = P(window of ỹ and u on [τᵢ, τᵢ₊₁])`.
///
/// `y_meas` may carry measurement noise; the observer never sees anything else.
pub fn run_reduced_order(
    model: &SystemModel,
    y_meas: &Signal,
    u: &Signal,
    z0: &[f64],
    settings: &ObserverSettings,
) -> Result<ObserverRun> {
    let plan = plan(model, y_meas, u, z0, settings)?;
    let grid = *y_meas.grid();
    let n = model.n();
    let mut run = ObserverRun {
        mode: ObserverMode::ReducedOrder,
        z: Signal::zeros(grid, n),
        w: None,
        reset_times: Vec::new(),
        reset_nodes: Vec::new(),
        reset_errors: Vec::new(),
        observability_failures: Vec::new(),
    };
    let mut state = ObserverState {
        z: z0.to_vec(),
        w: None,
        tau_i: grid.t0(),
        epoch: 0,
        window_start: 0,
        mode: ObserverMode::ReducedOrder,
    };
    run.z.at_mut(0).copy_from_slice(z0);

    let mut node = 0;
    loop {
        if node > 0 && node % plan.window_steps == 0 {
            if let Some(z) = reset_value(
                model, y_meas, u, &mut state, node, &plan, settings, &mut run,
            )? {
                state.z = z;
            }
            run.z.at_mut(node).copy_from_slice(&state.z);
        }
        if node == plan.total_steps {
            break;
        }
        let field = |point: StagePoint, s: &[f64], out: &mut [f64]| -> Result<()> {
            let j = node + point.offset();
            let (y, uj) = (y_meas.at(j), u.at(j));
            let dz =
                model.checked_a(y, uj)? * DVector::from_column_slice(s) + model.checked_b(y, uj)?;
            out.copy_from_slice(dz.as_slice());
            Ok(())
        };
        let step = rk4_step(field, &state.z, grid.time(node), grid.macro_step())?;
        run.z.at_mut(node + 1).copy_from_slice(&step.mid);
        run.z.at_mut(node + 2).copy_from_slice(&step.end);
        state.z = step.end;
        node += 2;
    }
    Ok(run)
}

/// Full-order observer: `z' = A(w, u) z + b(w, u)`, `w' = f(w, u) + C'(w) z`
/// with `z(τᵢ₊₁) = P(window)` and `w(τᵢ₊₁) = ỹ(τᵢ₊₁)`.
pub fn run_full_order(
    model: &SystemModel,
    y_meas: &Signal,
    u: &Signal,
    z0: &[f64],
    w0: &[f64],
    settings: &ObserverSettings,
) -> Result<ObserverRun> {
    let plan = plan(model, y_meas, u, z0, settings)?;
    let (n, k) = (model.n(), model.k());
    if w0.len() != k {
        return Err(Error::Domain(format!(
            "w0 has length {}, model expects {k}",
            w0.len()
        )));
    }
    let grid = *y_meas.grid();
    let mut run = ObserverRun {
        mode: ObserverMode::FullOrder,
        z: Signal::zeros(grid, n),
        w: Some(Signal::zeros(grid, k)),
        reset_times: Vec::new(),
        reset_nodes: Vec::new(),
        reset_errors: Vec::new(),
        observability_failures: Vec::new(),
    };
    let mut state = ObserverState {
        z: z0.to_vec(),
        w: Some(w0.to_vec()),
        tau_i: grid.t0(),
        epoch: 0,
        window_start: 0,
        mode: ObserverMode::FullOrder,
    };
    let store = |run: &mut ObserverRun, j: usize, zw: &[f64]| {
        run.z.at_mut(j).copy_from_slice(&zw[..n]);
        if let Some(w) = run.w.as_mut() {
            w.at_mut(j).copy_from_slice(&zw[n..]);
        }
    };
    let mut zw: Vec<f64> = z0.iter().chain(w0).copied().collect();
    store(&mut run, 0, &zw);

    let mut node = 0;
    loop {
        if node > 0 && node % plan.window_steps == 0 {
            state.z.copy_from_slice(&zw[..n]);
            if let Some(z) = reset_value(
                model, y_meas, u, &mut state, node, &plan, settings, &mut run,
            )? {
                zw[..n].copy_from_slice(&z);
            }
            zw[n..].copy_from_slice(y_meas.at(node));
            store(&mut run, node, &zw);
        }
        if node == plan.total_steps {
            break;
        }
        let field = |point: StagePoint, s: &[f64], out: &mut [f64]| -> Result<()> {
            let uj = u.at(node + point.offset());
            let (z, w) = s.split_at(n);
            let zv = DVector::from_column_slice(z);
            let dz = model.checked_a(w, uj)? * &zv + model.checked_b(w, uj)?;
            let dw = model.checked_f(w, uj)? + model.checked_ct(w)? * &zv;
            out[..n].copy_from_slice(dz.as_slice());
            out[n..].copy_from_slice(dw.as_slice());
            Ok(())
        };
        let step = rk4_step(field, &zw, grid.time(node), grid.macro_step())?;
        store(&mut run, node + 1, &step.mid);
        store(&mut run, node + 2, &step.end);
        zw = step.end;
        node += 2;
    }
    state.z.copy_from_slice(&zw[..n]);
    state.w = Some(zw[n..].to_vec());
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_catalog_model, LinearCoefficients, ModelParams};
    use crate::numerics::{simulate_plant, SampleGrid};
    use nalgebra::DMatrix;

    fn catalog(name: &str) -> SystemModel {
        build_catalog_model(name, &ModelParams::new()).unwrap()
    }

    fn plant(model: &SystemModel, x0: &[f64], h_s: f64, t_end: f64) -> (Trajectory, Signal) {
        let grid = SampleGrid::spanning(0.0, h_s, t_end).unwrap();
        let u = Signal::zeros(grid, model.m());
        let tr = simulate_plant(model, x0, &vec![0.0; model.k()], &u, t_end).unwrap();
        (tr, u)
    }

    fn max_after(errors: &[f64], grid: &SampleGrid, t: f64) -> f64 {
        errors
            .iter()
            .enumerate()
            .filter(|(j, _)| grid.time(*j) >= t - 1e-12)
            .map(|(_, &e)| e)
            .fold(0.0, f64::max)
    }

    #[test]
    fn reduced_order_recovers_constant_state() {
        let m = catalog("pure-integrator");
        let (tr, u) = plant(&m, &[2.0], 1e-3, 3.0);
        let run =
            run_reduced_order(&m, &tr.y, &u, &[-5.0], &ObserverSettings::new(1.0, 1e-10)).unwrap();
        assert_eq!(run.reset_times, vec![1.0, 2.0, 3.0]);
        let grid = run.z.grid();
        for j in 0..run.z.len() {
            if grid.time(j) >= 1.0 - 1e-12 {
                assert!((run.z.at(j)[0] - 2.0).abs() < 1e-7);
            } else {
                assert_eq!(run.z.at(j)[0], -5.0);
            }
        }
    }

    #[test]
    fn reduced_order_dead_beat_on_oscillator() {
        let m = catalog("harmonic-oscillator");
        let (tr, u) = plant(&m, &[1.0, -0.5], 1e-3, 5.0);
        let mut run = run_reduced_order(
            &m,
            &tr.y,
            &u,
            &[0.0, 0.0],
            &ObserverSettings::new(1.0, 1e-10),
        )
        .unwrap();
        let err = run.error_norms(&tr).unwrap();
        assert!(max_after(&err, tr.grid(), 1.0) <= 1e-6);
        run.attach_truth(&tr).unwrap();
        assert_eq!(run.reset_errors.len(), 5);
        assert!(run.reset_errors.iter().all(|&e| e <= 1e-6));
    }

    #[test]
    fn full_order_dead_beat() {
        let m = catalog("pure-integrator");
        let (tr, u) = plant(&m, &[2.0], 1e-3, 3.0);
        let run = run_full_order(
            &m,
            &tr.y,
            &u,
            &[0.0],
            &[7.0],
            &ObserverSettings::new(1.0, 1e-10),
        )
        .unwrap();
        let ez = run.error_norms(&tr).unwrap();
        let ew = run.output_error_norms(&tr).unwrap().unwrap();
        assert!(max_after(&ez, tr.grid(), 1.0) <= 1e-6);
        assert!(max_after(&ew, tr.grid(), 1.0) <= 1e-6);
        assert_eq!(run.w.as_ref().unwrap().at(0), &[7.0]);

        let m = catalog("harmonic-oscillator");
        let (tr, u) = plant(&m, &[0.2, 1.0], 1e-3, 5.0);
        let run = run_full_order(
            &m,
            &tr.y,
            &u,
            &[3.0, -3.0],
            &[4.0],
            &ObserverSettings::new(1.0, 1e-10),
        )
        .unwrap();
        let ez = run.error_norms(&tr).unwrap();
        let ew = run.output_error_norms(&tr).unwrap().unwrap();
        let total: Vec<f64> = ez.iter().zip(&ew).map(|(a, b)| a + b).collect();
        assert!(max_after(&total, tr.grid(), 1.0) <= 1e-6);
    }

    fn blind_model() -> SystemModel {
        SystemModel::linear(
            "blind",
            LinearCoefficients {
                a: DMatrix::zeros(1, 1),
                b: DVector::zeros(1),
                ct: DMatrix::zeros(1, 1),
                fy: DMatrix::zeros(1, 1),
                fu: DMatrix::zeros(1, 0),
                f0: DVector::from_element(1, 1.0),
            },
        )
        .unwrap()
    }

    #[test]
    fn unobservable_window_aborts_or_holds() {
        let m = blind_model();
        let (tr, u) = plant(&m, &[1.0], 1e-2, 3.0);
        let settings = ObserverSettings::new(1.0, 1e-10);
        let err = run_full_order(&m, &tr.y, &u, &[0.0], &[0.0], &settings).unwrap_err();
        assert!(matches!(err, Error::Observability { t, .. } if t == 1.0));
        assert!(matches!(
            run_reduced_order(&m, &tr.y, &u, &[0.0], &settings),
            Err(Error::Observability { .. })
        ));

        let run = run_reduced_order(
            &m,
            &tr.y,
            &u,
            &[0.5],
            &settings.with_policy(FailurePolicy::Hold),
        )
        .unwrap();
        assert_eq!(run.observability_failures, vec![1.0, 2.0, 3.0]);
        assert!(run.z.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn later_estimates_ignore_initial_guess() {
        let m = catalog("harmonic-oscillator");
        let (tr, u) = plant(&m, &[1.0, 0.0], 1e-3, 3.0);
        let s = ObserverSettings::new(1.0, 1e-10);
        let a = run_reduced_order(&m, &tr.y, &u, &[0.0, 0.0], &s).unwrap();
        let b = run_reduced_order(&m, &tr.y, &u, &[9.0, -4.0], &s).unwrap();
        let first = a.reset_nodes[0];
        assert_eq!(&a.z.values()[first * 2..], &b.z.values()[first * 2..]);
        assert_ne!(a.z.at(1), b.z.at(1));
    }

    #[test]
    fn zero_noise_channel_is_transparent() {
        let m = catalog("scalar-nonlinear");
        let grid = SampleGrid::spanning(0.0, 1e-3, 3.0).unwrap();
        let u = Signal::from_fn(grid, 1, |t| vec![t.sin()]).unwrap();
        let tr = simulate_plant(&m, &[1.0], &[0.0], &u, 3.0).unwrap();
        let noisy = tr.y.add(&Signal::zeros(grid, 1)).unwrap();
        let s = ObserverSettings::new(1.0, 1e-10);
        assert_eq!(
            run_reduced_order(&m, &tr.y, &u, &[0.0], &s).unwrap(),
            run_reduced_order(&m, &noisy, &u, &[0.0], &s).unwrap()
        );
    }

    #[test]
    fn reset_times_do_not_drift() {
        let m = catalog("pure-integrator");
        let r = 0.1;
        let (tr, u) = plant(&m, &[1.0], 1e-3, 3.0);
        let run =
            run_reduced_order(&m, &tr.y, &u, &[0.0], &ObserverSettings::new(r, 1e-10)).unwrap();
        assert_eq!(run.reset_times.len(), 30);
        for (i, (&t, &j)) in run.reset_times.iter().zip(&run.reset_nodes).enumerate() {
            assert_eq!(t, (i + 1) as f64 * r);
            assert_eq!(j, (i + 1) * 100);
        }
    }

    #[test]
    fn misaligned_horizon_rejected() {
        let m = catalog("pure-integrator");
        let (tr, u) = plant(&m, &[1.0], 0.1, 2.0);
        for r in [0.3, 0.1, 0.25] {
            let res = run_reduced_order(&m, &tr.y, &u, &[0.0], &ObserverSettings::new(r, 1e-10));
            assert!(matches!(res, Err(Error::Grid(_))), "r = {r}");
        }
    }

    #[test]
    fn noisy_scalar_run_stays_bounded() {
        let m = catalog("scalar-nonlinear");
        let grid = SampleGrid::spanning(0.0, 5e-4, 20.0).unwrap();
        let u = Signal::zeros(grid, 1);
        let tr = simulate_plant(&m, &[1.0], &[0.0], &u, 20.0).unwrap();
        let e = Signal::from_fn(grid, 1, |t| vec![0.01 * (100.0 * t).sin()]).unwrap();
        let run = run_reduced_order(
            &m,
            &tr.y.add(&e).unwrap(),
            &u,
            &[0.0],
            &ObserverSettings::new(1.0, 1e-10),
        )
        .unwrap();
        let sup = max_after(&run.error_norms(&tr).unwrap(), &grid, 1.0);
        assert!(sup.is_finite() && sup < 1.0, "{sup}");
    }
}
