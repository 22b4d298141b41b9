//! Sampled signals and fixed-step integration.
//!
//! Signals live on a uniform storage grid of step `h_s`. Integration uses
//! classic RK4 with macro step `h = 2·h_s`, so every stage of a macro step
//! reads its inputs from a stored node (start, midpoint, end) and no input
//! interpolation is ever needed on the hot path. The state at the midpoint
//! node is filled in with the third-order continuous extension of RK4.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::SystemModel;

/// Any state component above this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Relative slack (in units of `h_s`) for deciding that a time is on the grid.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    t0: f64,
    h_s: f64,
    count: usize,
}

impl SampleGrid {
    pub fn new(t0: f64, h_s: f64, count: usize) -> Result<Self> {
        if !(h_s > 0.0 && h_s.is_finite()) {
            return Err(Error::Grid(format!(
                "storage step must be positive and finite, got {h_s}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::Grid(format!("start time must be finite, got {t0}")));
        }
        if count < 2 {
            return Err(Error::Grid(format!(
                "a grid needs at least 2 nodes, got {count}"
            )));
        }
        Ok(Self { t0, h_s, count })
    }

    /// Grid covering `[t0, t0 + span]`; `span` must be a whole number of storage steps.
    pub fn spanning(t0: f64, h_s: f64, span: f64) -> Result<Self> {
        let steps = steps_in(span, h_s)?;
        Self::new(t0, h_s, steps + 1)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn h_s(&self) -> f64 {
        self.h_s
    }

    /// RK4 macro step, twice the storage step.
    pub fn macro_step(&self) -> f64 {
        2.0 * self.h_s
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.count - 1)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.h_s
    }

    /// Index of the node at time `t`, or a [`Error::Grid`] if `t` is off-grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let offset = t - self.t0;
        let j = steps_in(offset, self.h_s).map_err(|_| {
            Error::Grid(format!(
                "t = {t} is not a node of the grid starting at {} with step {}",
                self.t0, self.h_s
            ))
        })?;
        if j >= self.count {
            return Err(Error::Grid(format!(
                "t = {t} lies past the grid end {}",
                self.t_end()
            )));
        }
        Ok(j)
    }
}

/// Number of whole steps of size `h` in `span`; errors when `span` is not a multiple of `h`.
pub fn steps_in(span: f64, h: f64) -> Result<usize> {
    let ratio = span / h;
    let rounded = ratio.round();
    if !ratio.is_finite() || rounded < 0.0 || (ratio - rounded).abs() > ALIGN_TOL * rounded.max(1.0)
    {
        return Err(Error::Grid(format!(
            "{span} is not a whole multiple of {h}"
        )));
    }
    Ok(rounded as usize)
}

/// A vector-valued time series on a [`SampleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: SampleGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Signal {
    /// `values` holds `dim` entries per node, node-major.
    pub fn new(grid: SampleGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() * dim {
            return Err(Error::Grid(format!(
                "signal of dim {dim} on {} nodes needs {} values, got {}",
                grid.count(),
                grid.count() * dim,
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: SampleGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.count() * dim],
        }
    }

    pub fn from_fn(
        grid: SampleGrid,
        dim: usize,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.count() * dim);
        for j in 0..grid.count() {
            let v = f(grid.time(j));
            if v.len() != dim {
                return Err(Error::Grid(format!(
                    "sample at node {j} has length {}, expected {dim}",
                    v.len()
                )));
            }
            values.extend_from_slice(&v);
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn at_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn time(&self, j: usize) -> f64 {
        self.grid.time(j)
    }

    /// Copy of nodes `start..=start + steps`, re-based to start at time 0.
    pub fn slice(&self, start: usize, steps: usize) -> Result<Self> {
        if steps == 0 || start + steps >= self.len() {
            return Err(Error::Grid(format!(
                "slice of {steps} steps from node {start} exceeds a signal of {} nodes",
                self.len()
            )));
        }
        let grid = SampleGrid::new(0.0, self.grid.h_s, steps + 1)?;
        let values = self.values[start * self.dim..(start + steps + 1) * self.dim].to_vec();
        Ok(Self {
            grid,
            dim: self.dim,
            values,
        })
    }

    /// Sample-wise sum of two signals on the same grid.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::Grid(
                "cannot add signals on different grids or dimensions".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    /// Euclidean norm of the sample at each node.
    pub fn norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.at(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Value at an arbitrary time inside the grid by cubic Lagrange
    /// interpolation through the four surrounding nodes.
    pub fn sample_at(&self, t: f64) -> Result<Vec<f64>> {
        let s = (t - self.grid.t0) / self.grid.h_s;
        let last = (self.len() - 1) as f64;
        if !(s >= -ALIGN_TOL && s <= last + ALIGN_TOL) {
            return Err(Error::Grid(format!(
                "t = {t} outside [{}, {}]",
                self.grid.t0,
                self.grid.t_end()
            )));
        }
        let nearest = s.round();
        if (s - nearest).abs() <= ALIGN_TOL {
            return Ok(self.at(nearest as usize).to_vec());
        }
        let base = (s.floor() as isize - 1).clamp(0, (self.len() as isize - 4).max(0)) as usize;
        let nodes: Vec<usize> = (base..(base + 4).min(self.len())).collect();
        let mut out = vec![0.0; self.dim];
        for &i in &nodes {
            let mut w = 1.0;
            for &j in &nodes {
                if j != i {
                    w *= (s - j as f64) / (i as f64 - j as f64);
                }
            }
            for (o, v) in out.iter_mut().zip(self.at(i)) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

/// A sampled plant solution `(x(t), y(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Signal,
    pub y: Signal,
    /// First time at which the state left the finite range. Samples from
    /// this node on are NaN.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn grid(&self) -> &SampleGrid {
        self.x.grid()
    }

    /// Number of leading nodes holding valid samples.
    pub fn valid_len(&self) -> usize {
        match self.diverged_at {
            None => self.x.len(),
            Some(_) => (0..self.x.len())
                .find(|&j| self.x.at(j).iter().any(|v| v.is_nan()))
                .unwrap_or(self.x.len()),
        }
    }
}

/// Output and input restricted to one observation window `[0, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowData {
    y: Signal,
    u: Signal,
}

impl WindowData {
    pub fn new(y: Signal, u: Signal) -> Result<Self> {
        if y.grid() != u.grid() {
            return Err(Error::Grid(
                "output and input windows must share one grid".into(),
            ));
        }
        let steps = y.len() - 1;
        if steps < 2 || !steps.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "a window must span a whole, nonzero number of macro steps (got {steps} storage steps)"
            )));
        }
        Ok(Self { y, u })
    }

    /// The window `[t_start, t_start + r]` of a pair of recorded signals.
    pub fn from_signals(y: &Signal, u: &Signal, t_start: f64, r: f64) -> Result<Self> {
        Self::new(window_shift(y, t_start, r)?, window_shift(u, t_start, r)?)
    }

    pub fn y(&self) -> &Signal {
        &self.y
    }

    pub fn u(&self) -> &Signal {
        &self.u
    }

    pub fn grid(&self) -> &SampleGrid {
        self.y.grid()
    }

    /// Window length `r`.
    pub fn len_time(&self) -> f64 {
        self.grid().t_end()
    }

    pub fn macro_steps(&self) -> usize {
        (self.y.len() - 1) / 2
    }
}

/// The shifted restriction `s ↦ signal(t_start + s)` for `s ∈ [0, r]`.
pub fn window_shift(signal: &Signal, t_start: f64, r: f64) -> Result<Signal> {
    let start = signal.grid().index_of(t_start)?;
    let steps = steps_in(r, signal.grid().h_s())?;
    signal.slice(start, steps)
}

/// Where in a macro step an RK4 stage reads its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagePoint {
    Start,
    Mid,
    End,
}

impl StagePoint {
    /// Storage-node offset from the start of a macro step.
    pub fn offset(self) -> usize {
        match self {
            StagePoint::Start => 0,
            StagePoint::Mid => 1,
            StagePoint::End => 2,
        }
    }
}

/// Result of one RK4 step: the state at the end and at the midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Rk4Step {
    pub mid: Vec<f64>,
    pub end: Vec<f64>,
}

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    if values
        .iter()
        .all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT)
    {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

/// One classic RK4 step of size `h` from `(t, state)`.
///
/// `field(point, state, out)` writes the derivative into `out`, reading any
/// time-dependent inputs at `point`. The midpoint state uses the
/// continuous extension `x + h(5k1 + 4k2 + 4k3 − k4)/24`.
pub fn rk4_step<F>(mut field: F, state: &[f64], t: f64, h: f64) -> Result<Rk4Step>
where
    F: FnMut(StagePoint, &[f64], &mut [f64]) -> Result<()>,
{
    let d = state.len();
    check_finite(state, t)?;
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    field(StagePoint::Start, state, &mut k1)?;
    check_finite(&k1, t)?;
    for i in 0..d {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    check_finite(&tmp, t + 0.5 * h)?;
    field(StagePoint::Mid, &tmp, &mut k2)?;
    check_finite(&k2, t + 0.5 * h)?;
    for i in 0..d {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    check_finite(&tmp, t + 0.5 * h)?;
    field(StagePoint::Mid, &tmp, &mut k3)?;
    check_finite(&k3, t + 0.5 * h)?;
    for i in 0..d {
        tmp[i] = state[i] + h * k3[i];
    }
    check_finite(&tmp, t + h)?;
    field(StagePoint::End, &tmp, &mut k4)?;
    check_finite(&k4, t + h)?;

    let mut mid = vec![0.0; d];
    let mut end = vec![0.0; d];
    for i in 0..d {
        end[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        mid[i] = state[i] + h / 24.0 * (5.0 * k1[i] + 4.0 * k2[i] + 4.0 * k3[i] - k4[i]);
    }
    check_finite(&mid, t + 0.5 * h)?;
    check_finite(&end, t + h)?;
    Ok(Rk4Step { mid, end })
}

/// Plant simulation that records divergence instead of failing.
///
/// `u` supplies the grid; the run covers `[t0, t0 + t_end]` which must be a
/// whole number of macro steps.
pub fn simulate_plant_partial(
    model: &SystemModel,
    x0: &[f64],
    y0: &[f64],
    u: &Signal,
    t_end: f64,
) -> Result<Trajectory> {
    let (n, k) = (model.n(), model.k());
    if x0.len() != n || y0.len() != k {
        return Err(Error::Domain(format!(
            "initial state has lengths ({}, {}), model expects ({n}, {k})",
            x0.len(),
            y0.len()
        )));
    }
    if u.dim() != model.m() {
        return Err(Error::Domain(format!(
            "input has dim {}, model expects {}",
            u.dim(),
            model.m()
        )));
    }
    if x0.iter().chain(y0).any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }
    let steps = steps_in(t_end, u.grid().h_s())?;
    if !steps.is_multiple_of(2) || steps == 0 {
        return Err(Error::Grid(format!(
            "horizon {t_end} is not a whole number of macro steps"
        )));
    }
    if steps >= u.len() {
        return Err(Error::Grid(format!(
            "input covers {} but the horizon is {t_end}",
            u.grid().t_end() - u.grid().t0()
        )));
    }
    let grid = SampleGrid::new(u.grid().t0(), u.grid().h_s(), steps + 1)?;
    let h = grid.macro_step();

    let mut xs = Signal::zeros(grid, n);
    let mut ys = Signal::zeros(grid, k);
    xs.at_mut(0).copy_from_slice(x0);
    ys.at_mut(0).copy_from_slice(y0);

    let mut state: Vec<f64> = x0.iter().chain(y0).copied().collect();
    let mut diverged_at = None;
    for step in 0..steps / 2 {
        let node = 2 * step;
        let field = |point: StagePoint, s: &[f64], out: &mut [f64]| -> Result<()> {
            let uj = u.at(node + point.offset());
            let (x, y) = s.split_at(n);
            let xv = DVector::from_column_slice(x);
            let dx = model.checked_a(y, uj)? * &xv + model.checked_b(y, uj)?;
            let dy = model.checked_f(y, uj)? + model.checked_ct(y)? * &xv;
            out[..n].copy_from_slice(dx.as_slice());
            out[n..].copy_from_slice(dy.as_slice());
            Ok(())
        };
        match rk4_step(field, &state, grid.time(node), h) {
            Ok(out) => {
                xs.at_mut(node + 1).copy_from_slice(&out.mid[..n]);
                ys.at_mut(node + 1).copy_from_slice(&out.mid[n..]);
                xs.at_mut(node + 2).copy_from_slice(&out.end[..n]);
                ys.at_mut(node + 2).copy_from_slice(&out.end[n..]);
                state = out.end;
            }
            Err(Error::Divergence { t }) => {
                diverged_at = Some(t);
                for j in node + 1..grid.count() {
                    xs.at_mut(j).fill(f64::NAN);
                    ys.at_mut(j).fill(f64::NAN);
                }
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        x: xs,
        y: ys,
        diverged_at,
    })
}

/// Integrates the plant from `(x0, y0)` driven by `u` over `[t0, t0 + t_end]`.
pub fn simulate_plant(
    model: &SystemModel,
    x0: &[f64],
    y0: &[f64],
    u: &Signal,
    t_end: f64,
) -> Result<Trajectory> {
    let traj = simulate_plant_partial(model, x0, y0, u, t_end)?;
    match traj.diverged_at {
        Some(t) => Err(Error::Divergence { t }),
        None => Ok(traj),
    }
}
