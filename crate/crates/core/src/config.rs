//! Experiment configuration files.
//!
//! A config is a TOML document. Every section except `[model]` and
//! `[grid]` is optional:
//!
//! ```toml
//! [model]
//! name = "harmonic-oscillator"     # or pure-integrator, scalar-nonlinear, linear
//! params = { omega = 1.0 }
//!
//! [initial]
//! x0 = [1.0, 0.0]                  # defaults to zeros
//! y0 = [0.0]
//! z0 = [0.0, 0.0]
//! w0 = [0.0]                       # full-order observer only
//!
//! [input]
//! kind = "constant"                # constant | sinusoid | table
//! value = []
//!
//! [grid]
//! h_s = 5e-4                       # storage step, default 5e-4
//! t_end = 5.0
//!
//! [observer]
//! r = 1.0                          # multiple of 2*h_s
//! tol = 1e-10
//! mode = "reduced"                 # reduced | full
//! on_failure = "abort"             # abort | hold
//!
//! [noise]
//! kind = "sinusoid"                # none | uniform | sinusoid | decaying-sinusoid
//! amplitude = 0.01
//! frequency = 100.0
//! decay = 0.0
//! seed = 0
//!
//! [sweep]
//! kind = "bibo"                    # bibo | cico
//! amplitudes = [1e-3, 1e-2, 1e-1]
//!
//! [output]
//! dir = "out"
//! plot = false
//! ```
//!
//! A `linear` model takes constant row-major matrices `a` (n×n), `b` (n),
//! `ct` (k×n), `fy` (k×k), `fu` (k×m) and `f0` (k); `f(y, u) = fy·y + fu·u + f0`.

use std::fmt;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::estimator::DEFAULT_TOL;
use crate::harness::{NoiseKind, NoiseSpec};
use crate::model::{build_catalog_model, LinearCoefficients, ModelParams, SystemModel};
use crate::numerics::{steps_in, SampleGrid, Signal};
use crate::observer::{FailurePolicy, ObserverMode, ObserverSettings};

pub const DEFAULT_H_S: f64 = 5e-4;

/// One problem with a config document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `observer.r`.
    pub field: String,
    /// 1-based line in the document, when it can be located.
    pub line: Option<usize>,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.reason),
            None => write!(f, "{}: {}", self.field, self.reason),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    input: RawInput,
    grid: Option<RawGrid>,
    #[serde(default)]
    observer: RawObserver,
    #[serde(default)]
    noise: RawNoise,
    sweep: Option<RawSweep>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default)]
    params: ModelParams,
    a: Option<Vec<Vec<f64>>>,
    b: Option<Vec<f64>>,
    ct: Option<Vec<Vec<f64>>>,
    fy: Option<Vec<Vec<f64>>>,
    fu: Option<Vec<Vec<f64>>>,
    f0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    z0: Option<Vec<f64>>,
    w0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    kind: Option<String>,
    value: Option<Vec<f64>>,
    amplitude: Option<Vec<f64>>,
    offset: Option<Vec<f64>>,
    frequency: Option<f64>,
    phase: Option<f64>,
    times: Option<Vec<f64>>,
    values: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    h_s: Option<f64>,
    t_end: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    r: Option<f64>,
    tol: Option<f64>,
    mode: Option<String>,
    on_failure: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    kind: Option<String>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
    decay: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    kind: String,
    #[serde(default)]
    amplitudes: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    plot: Option<bool>,
}

/// Known input `u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Constant(Vec<f64>),
    /// `offset + amplitude · sin(frequency · t + phase)`, per channel.
    Sinusoid {
        amplitude: Vec<f64>,
        offset: Vec<f64>,
        frequency: f64,
        phase: f64,
    },
    /// Holds `values[i]` on `[times[i], times[i+1])`; the last value holds to the end.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSpec {
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        match self {
            InputSpec::Constant(v) => v.clone(),
            InputSpec::Sinusoid {
                amplitude,
                offset,
                frequency,
                phase,
            } => {
                let s = (frequency * t + phase).sin();
                amplitude
                    .iter()
                    .zip(offset)
                    .map(|(a, o)| o + a * s)
                    .collect()
            }
            InputSpec::Table { times, values } => {
                let i = times.partition_point(|&ti| ti <= t).saturating_sub(1);
                values[i].clone()
            }
        }
    }

    pub fn signal(&self, grid: SampleGrid, m: usize) -> crate::Result<Signal> {
        Signal::from_fn(grid, m, |t| self.value_at(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Bibo,
    Cico,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: SystemModel,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub z0: Vec<f64>,
    pub w0: Vec<f64>,
    pub input: InputSpec,
    pub h_s: f64,
    pub t_end: f64,
    pub r: f64,
    pub tol: f64,
    pub mode: ObserverMode,
    pub on_failure: FailurePolicy,
    pub noise: NoiseSpec,
    pub sweep: Option<SweepConfig>,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn grid(&self) -> SampleGrid {
        SampleGrid::spanning(0.0, self.h_s, self.t_end).expect("validated at parse time")
    }

    pub fn input_signal(&self) -> crate::Result<Signal> {
        self.input.signal(self.grid(), self.model.m())
    }

    pub fn observer_settings(&self) -> ObserverSettings {
        ObserverSettings::new(self.r, self.tol).with_policy(self.on_failure)
    }
}

struct Collector<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
}

impl Collector<'_> {
    fn push(&mut self, field: &str, reason: impl Into<String>) {
        let line = locate(self.text, field);
        self.errors.push(ConfigError {
            field: field.to_string(),
            line,
            reason: reason.into(),
        });
    }
}

/// Finds the line declaring `path` (`section.key`), falling back to shorter
/// prefixes of the path.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut parts: Vec<&str> = path.split('.').collect();
    while !parts.is_empty() {
        let (section, key) = match parts.split_last() {
            Some((key, rest)) if !rest.is_empty() => (rest.join("."), Some(*key)),
            _ => (parts[0].to_string(), None),
        };
        let mut current = String::new();
        for (i, line) in text.lines().enumerate() {
            let l = line.trim();
            if l.starts_with('[') {
                current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                if key.is_none() && current == section {
                    return Some(i + 1);
                }
                continue;
            }
            if let (Some(key), Some((lhs, _))) = (key, l.split_once('=')) {
                if current == section && lhs.trim() == key {
                    return Some(i + 1);
                }
            }
        }
        parts.pop();
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn matrix(rows: &[Vec<f64>], ncols_hint: usize) -> Option<DMatrix<f64>> {
    let ncols = rows.first().map_or(ncols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Some(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn build_model(raw: &RawModel, c: &mut Collector) -> Option<SystemModel> {
    if raw.name != "linear" {
        for field in ["a", "b", "ct", "fy", "fu", "f0"] {
            let present = match field {
                "a" => raw.a.is_some(),
                "b" => raw.b.is_some(),
                "ct" => raw.ct.is_some(),
                "fy" => raw.fy.is_some(),
                "fu" => raw.fu.is_some(),
                _ => raw.f0.is_some(),
            };
            if present {
                c.push(
                    &format!("model.{field}"),
                    "only `linear` models take coefficient matrices",
                );
            }
        }
        return match build_catalog_model(&raw.name, &raw.params) {
            Ok(m) => Some(m),
            Err(crate::Error::Catalog(name)) => {
                c.push("model.name", format!("unknown model `{name}` (expected one of pure-integrator, harmonic-oscillator, scalar-nonlinear, linear)"));
                None
            }
            Err(e) => {
                c.push("model.params", e.to_string());
                None
            }
        };
    }

    if !raw.params.is_empty() {
        c.push(
            "model.params",
            "`linear` models take coefficient matrices, not params",
        );
    }
    let Some(a_rows) = &raw.a else {
        c.push("model.a", "required for a linear model");
        return None;
    };
    let Some(ct_rows) = &raw.ct else {
        c.push("model.ct", "required for a linear model");
        return None;
    };
    let n = a_rows.len();
    let k = ct_rows.len();
    let (Some(a), Some(ct)) = (matrix(a_rows, n), matrix(ct_rows, n)) else {
        c.push("model", "coefficient matrices must be rectangular");
        return None;
    };
    let fy = match &raw.fy {
        Some(rows) => matrix(rows, k),
        None => Some(DMatrix::zeros(k, k)),
    };
    let fu = match &raw.fu {
        Some(rows) => matrix(rows, 0),
        None => Some(DMatrix::zeros(k, 0)),
    };
    let (Some(fy), Some(fu)) = (fy, fu) else {
        c.push("model", "coefficient matrices must be rectangular");
        return None;
    };
    let coeffs = LinearCoefficients {
        a,
        b: raw
            .b
            .clone()
            .map_or_else(|| DVector::zeros(n), DVector::from_vec),
        ct,
        fy,
        fu,
        f0: raw
            .f0
            .clone()
            .map_or_else(|| DVector::zeros(k), DVector::from_vec),
    };
    match SystemModel::linear("linear", coeffs) {
        Ok(m) => Some(m),
        Err(e) => {
            c.push("model", e.to_string());
            None
        }
    }
}

fn vector(c: &mut Collector, field: &str, value: Option<&Vec<f64>>, len: usize) -> Vec<f64> {
    match value {
        None => vec![0.0; len],
        Some(v) if v.len() != len => {
            c.push(field, format!("expected {len} entries, got {}", v.len()));
            vec![0.0; len]
        }
        Some(v) if v.iter().any(|x| !x.is_finite()) => {
            c.push(field, "entries must be finite");
            vec![0.0; len]
        }
        Some(v) => v.clone(),
    }
}

fn parse_input(raw: &RawInput, m: usize, c: &mut Collector) -> InputSpec {
    let kind = raw.kind.as_deref().unwrap_or("constant");
    let stray = |c: &mut Collector, allowed: &[&str]| {
        let fields = [
            ("value", raw.value.is_some()),
            ("amplitude", raw.amplitude.is_some()),
            ("offset", raw.offset.is_some()),
            ("frequency", raw.frequency.is_some()),
            ("phase", raw.phase.is_some()),
            ("times", raw.times.is_some()),
            ("values", raw.values.is_some()),
        ];
        for (name, present) in fields {
            if present && !allowed.contains(&name) {
                c.push(
                    &format!("input.{name}"),
                    format!("not used by a `{kind}` input"),
                );
            }
        }
    };
    match kind {
        "constant" => {
            stray(c, &["value"]);
            InputSpec::Constant(vector(c, "input.value", raw.value.as_ref(), m))
        }
        "sinusoid" => {
            stray(c, &["amplitude", "offset", "frequency", "phase"]);
            let frequency = raw.frequency.unwrap_or(1.0);
            let phase = raw.phase.unwrap_or(0.0);
            if !frequency.is_finite() || !phase.is_finite() {
                c.push("input.frequency", "frequency and phase must be finite");
            }
            InputSpec::Sinusoid {
                amplitude: vector(c, "input.amplitude", raw.amplitude.as_ref(), m),
                offset: vector(c, "input.offset", raw.offset.as_ref(), m),
                frequency,
                phase,
            }
        }
        "table" => {
            stray(c, &["times", "values"]);
            let times = raw.times.clone().unwrap_or_default();
            let values = raw.values.clone().unwrap_or_default();
            if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                c.push("input.times", "times must start at 0 and increase strictly");
            }
            if values.len() != times.len()
                || values
                    .iter()
                    .any(|v| v.len() != m || v.iter().any(|x| !x.is_finite()))
            {
                c.push(
                    "input.values",
                    format!("need one finite row of {m} entries per time"),
                );
            }
            if times.is_empty() || values.is_empty() {
                InputSpec::Constant(vec![0.0; m])
            } else {
                InputSpec::Table { times, values }
            }
        }
        other => {
            c.push(
                "input.kind",
                format!("unknown input kind `{other}` (expected constant, sinusoid, table)"),
            );
            InputSpec::Constant(vec![0.0; m])
        }
    }
}

fn parse_noise(raw: &RawNoise, c: &mut Collector) -> NoiseSpec {
    let kind = match raw.kind.as_deref().unwrap_or("none") {
        "none" => NoiseKind::None,
        "uniform" => NoiseKind::Uniform,
        "sinusoid" => NoiseKind::Sinusoid,
        "decaying-sinusoid" => NoiseKind::DecayingSinusoid,
        other => {
            c.push("noise.kind", format!("unknown noise kind `{other}`"));
            NoiseKind::None
        }
    };
    let spec = NoiseSpec {
        kind,
        amplitude: raw.amplitude.unwrap_or(0.0),
        frequency: raw.frequency.unwrap_or(0.0),
        decay: raw.decay.unwrap_or(0.0),
        seed: raw.seed.unwrap_or(0),
    };
    if !(spec.amplitude >= 0.0 && spec.amplitude.is_finite()) {
        c.push("noise.amplitude", "must be finite and >= 0");
    }
    if !spec.frequency.is_finite() {
        c.push("noise.frequency", "must be finite");
    }
    if !(spec.decay >= 0.0 && spec.decay.is_finite()) {
        c.push("noise.decay", "must be finite and >= 0");
    }
    spec
}

/// Parses and validates a config document, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        vec![ConfigError {
            field: "<document>".into(),
            line,
            reason: e.message().to_string(),
        }]
    })?;
    let mut c = Collector {
        text,
        errors: Vec::new(),
    };

    let model = match &raw.model {
        Some(m) => build_model(m, &mut c),
        None => {
            c.push("model", "missing [model] section");
            None
        }
    };

    let (h_s, t_end) = match &raw.grid {
        Some(g) => (g.h_s.unwrap_or(DEFAULT_H_S), g.t_end),
        None => {
            c.push("grid", "missing [grid] section");
            (DEFAULT_H_S, 0.0)
        }
    };
    let mut grid_ok = raw.grid.is_some();
    if !(h_s > 0.0 && h_s.is_finite()) {
        c.push("grid.h_s", format!("must be positive, got {h_s}"));
        grid_ok = false;
    }
    if grid_ok {
        match steps_in(t_end, 2.0 * h_s) {
            Ok(steps) if steps >= 1 => {}
            _ => {
                c.push(
                    "grid.t_end",
                    format!(
                        "must be a positive multiple of the macro step 2*h_s = {}",
                        2.0 * h_s
                    ),
                );
                grid_ok = false;
            }
        }
    }

    let r = raw.observer.r.unwrap_or(1.0);
    if grid_ok {
        match steps_in(r, 2.0 * h_s) {
            Ok(steps) if steps >= 1 => {
                if r > t_end * (1.0 + 1e-12) {
                    c.push("observer.r", format!("horizon {r} exceeds t_end = {t_end}"));
                }
            }
            _ => c.push(
                "observer.r",
                format!(
                    "must be a positive multiple of the macro step 2*h_s = {}",
                    2.0 * h_s
                ),
            ),
        }
    }
    let tol = raw.observer.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        c.push("observer.tol", "must be positive");
    }
    let mode = match raw.observer.mode.as_deref().unwrap_or("reduced") {
        "reduced" => ObserverMode::ReducedOrder,
        "full" => ObserverMode::FullOrder,
        other => {
            c.push(
                "observer.mode",
                format!("unknown mode `{other}` (expected reduced or full)"),
            );
            ObserverMode::ReducedOrder
        }
    };
    let on_failure = match raw.observer.on_failure.as_deref().unwrap_or("abort") {
        "abort" => FailurePolicy::Abort,
        "hold" => FailurePolicy::Hold,
        other => {
            c.push(
                "observer.on_failure",
                format!("unknown policy `{other}` (expected abort or hold)"),
            );
            FailurePolicy::Abort
        }
    };

    let noise = parse_noise(&raw.noise, &mut c);

    let sweep = raw.sweep.as_ref().map(|s| {
        let kind = match s.kind.as_str() {
            "bibo" => SweepKind::Bibo,
            "cico" => SweepKind::Cico,
            other => {
                c.push(
                    "sweep.kind",
                    format!("unknown sweep `{other}` (expected bibo or cico)"),
                );
                SweepKind::Bibo
            }
        };
        match kind {
            SweepKind::Bibo => {
                if noise.kind == NoiseKind::None {
                    c.push("noise.kind", "a bibo sweep needs a noise kind to scale");
                }
                if s.amplitudes.is_empty() {
                    c.push("sweep.amplitudes", "amplitude list is empty");
                } else if s.amplitudes.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                    c.push("sweep.amplitudes", "amplitudes must be finite and >= 0");
                }
            }
            SweepKind::Cico => {
                if noise.kind != NoiseKind::DecayingSinusoid {
                    c.push("noise.kind", "a cico sweep needs decaying-sinusoid noise");
                } else if !(noise.decay > 0.0) {
                    c.push("noise.decay", "a cico sweep needs decay > 0");
                }
            }
        }
        SweepConfig {
            kind,
            amplitudes: s.amplitudes.clone(),
        }
    });

    let (n, k, m) = model.as_ref().map_or((0, 0, 0), |m| (m.n(), m.k(), m.m()));
    let x0 = vector(&mut c, "initial.x0", raw.initial.x0.as_ref(), n);
    let y0 = vector(&mut c, "initial.y0", raw.initial.y0.as_ref(), k);
    let z0 = vector(&mut c, "initial.z0", raw.initial.z0.as_ref(), n);
    let w0 = vector(&mut c, "initial.w0", raw.initial.w0.as_ref(), k);
    let input = parse_input(&raw.input, m, &mut c);

    match model {
        Some(model) if c.errors.is_empty() => Ok(ExperimentConfig {
            model,
            x0,
            y0,
            z0,
            w0,
            input,
            h_s,
            t_end,
            r,
            tol,
            mode,
            on_failure,
            noise,
            sweep,
            output_dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            plot: raw.output.plot.unwrap_or(false),
        }),
        _ => Err(c.errors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<ConfigError> {
        parse_config(text).unwrap_err()
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg =
            parse_config("[model]\nname = \"pure-integrator\"\n[grid]\nt_end = 3.0\n").unwrap();
        assert_eq!(cfg.model.name(), "pure-integrator");
        assert_eq!(cfg.x0, vec![0.0]);
        assert_eq!(cfg.w0, vec![0.0]);
        assert_eq!(cfg.h_s, DEFAULT_H_S);
        assert_eq!(cfg.r, 1.0);
        assert_eq!(cfg.tol, DEFAULT_TOL);
        assert_eq!(cfg.mode, ObserverMode::ReducedOrder);
        assert_eq!(cfg.on_failure, FailurePolicy::Abort);
        assert_eq!(cfg.noise, NoiseSpec::none());
        assert_eq!(cfg.input, InputSpec::Constant(vec![]));
        assert!(cfg.sweep.is_none());
        assert!(!cfg.plot);
    }

    #[test]
    fn misaligned_horizon_is_reported_on_r() {
        let text = "[model]\nname = \"pure-integrator\"\n[grid]\nh_s = 0.1\nt_end = 2.0\n[observer]\nr = 0.3\n";
        let errs = errors(text);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "observer.r");
        assert_eq!(errs[0].line, Some(7));
    }

    #[test]
    fn unknown_model_is_reported_on_name() {
        let errs = errors("[grid]\nt_end = 1.0\n[model]\nname = \"chemostat\"\n");
        assert_eq!(errs[0].field, "model.name");
        assert_eq!(errs[0].line, Some(4));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let errs = errors("[model]\nname = \"pure-integrator\"\n[grid]\nt_end = \n");
        assert_eq!(errs[0].line, Some(4));
        let errs = errors("[model]\nname = \"pure-integrator\"\ncolour = 1\n[grid]\nt_end = 1.0\n");
        assert_eq!(errs[0].line, Some(3));
    }

    #[test]
    fn all_problems_are_collected() {
        let text = r#"
[model]
name = "harmonic-oscillator"
[initial]
x0 = [1.0]
[grid]
t_end = 2.0
[observer]
tol = -1.0
mode = "sideways"
[sweep]
kind = "bibo"
amplitudes = []
"#;
        let fields: Vec<String> = errors(text).into_iter().map(|e| e.field).collect();
        for f in [
            "initial.x0",
            "observer.tol",
            "observer.mode",
            "sweep.amplitudes",
        ] {
            assert!(fields.iter().any(|x| x == f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn horizon_longer_than_run_rejected() {
        let errs = errors("[model]\nname = \"pure-integrator\"\n[grid]\nh_s = 0.01\nt_end = 1.0\n[observer]\nr = 2.0\n");
        assert_eq!(errs[0].field, "observer.r");
    }

    #[test]
    fn linear_model_from_matrices() {
        let text = r#"
[model]
name = "linear"
a = [[0.0, 1.0], [-1.0, 0.0]]
ct = [[0.0, 0.0], [1.0, 0.0]]
[initial]
x0 = [1.0, 2.0]
[grid]
h_s = 0.01
t_end = 1.0
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!((cfg.model.n(), cfg.model.k(), cfg.model.m()), (2, 2, 0));
        assert_eq!(cfg.y0, vec![0.0, 0.0]);

        let errs = errors("[model]\nname = \"linear\"\na = [[1.0, 2.0], [3.0]]\nct = [[1.0, 0.0]]\n[grid]\nt_end = 1.0\n");
        assert_eq!(errs[0].field, "model");
    }

    #[test]
    fn input_kinds() {
        let base = "[model]\nname = \"scalar-nonlinear\"\n[grid]\nh_s = 0.25\nt_end = 2.0\n";
        let cfg = parse_config(&format!(
            "{base}[input]\nkind = \"table\"\ntimes = [0.0, 1.0]\nvalues = [[2.0], [-1.0]]\n"
        ))
        .unwrap();
        let u = cfg.input_signal().unwrap();
        assert_eq!(u.at(3), &[2.0]);
        assert_eq!(u.at(4), &[-1.0]);
        assert_eq!(u.at(8), &[-1.0]);

        let cfg = parse_config(&format!("{base}[input]\nkind = \"sinusoid\"\namplitude = [2.0]\noffset = [1.0]\nfrequency = 3.0\n")).unwrap();
        assert_eq!(cfg.input.value_at(0.5), vec![1.0 + 2.0 * 1.5f64.sin()]);

        let errs = errors(&format!(
            "{base}[input]\nkind = \"table\"\ntimes = [0.5, 0.2]\nvalues = [[1.0]]\n"
        ));
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["input.times", "input.values"]);

        let errs = errors(&format!("{base}[input]\nvalue = [1.0, 2.0]\n"));
        assert_eq!(errs[0].field, "input.value");
    }

    #[test]
    fn cico_sweep_needs_decay() {
        let base =
            "[model]\nname = \"scalar-nonlinear\"\n[grid]\nt_end = 2.0\n[sweep]\nkind = \"cico\"\n";
        assert_eq!(errors(base)[0].field, "noise.kind");
        let errs = errors(&format!(
            "{base}[noise]\nkind = \"decaying-sinusoid\"\namplitude = 0.1\n"
        ));
        assert_eq!(errs[0].field, "noise.decay");
        assert!(parse_config(&format!(
            "{base}[noise]\nkind = \"decaying-sinusoid\"\namplitude = 0.1\ndecay = 0.2\n"
        ))
        .is_ok());
    }

    #[test]
    fn display_includes_line() {
        let e = ConfigError {
            field: "observer.r".into(),
            line: Some(3),
            reason: "bad".into(),
        };
        assert_eq!(e.to_string(), "line 3: observer.r: bad");
    }
}
