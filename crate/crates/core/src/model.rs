//! Systems of the form
//!
//! ```text
//! x' = A(y, u) x + b(y, u)
//! y' = f(y, u) + C'(y) x
//! ```
//!
//! with `x ∈ ℝⁿ` unmeasured, `y ∈ ℝᵏ` measured and `u ∈ ℝᵐ` a known input.
//! A [`SystemModel`] is an immutable bundle of the four coefficient maps;
//! it carries no state and can be shared freely between threads.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type InputMatrixFn = dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync;
type InputVectorFn = dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync;
type OutputMatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Scalar parameters of a catalog model, keyed by name.
pub type ModelParams = BTreeMap<String, f64>;

/// Names accepted by [`build_catalog_model`].
pub const CATALOG: [&str; 3] = ["pure-integrator", "harmonic-oscillator", "scalar-nonlinear"];

#[derive(Clone)]
pub struct SystemModel {
    name: String,
    notes: String,
    n: usize,
    k: usize,
    m: usize,
    a: Arc<InputMatrixFn>,
    b: Arc<InputVectorFn>,
    ct: Arc<OutputMatrixFn>,
    f: Arc<InputVectorFn>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

/// Constant coefficients of a linear model; `f(y, u) = fy·y + fu·u + f0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoefficients {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub ct: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    pub fu: DMatrix<f64>,
    pub f0: DVector<f64>,
}

impl SystemModel {
    /// Builds a model from its coefficient maps.
    ///
    /// `a(y, u)` must return `n×n`, `b(y, u)` an `n`-vector, `ct(y)` the
    /// `k×n` matrix `C'` and `f(y, u)` a `k`-vector. Shapes are only checked
    /// lazily (see [`validate_model`] and the checked evaluators).
    #[allow(clippy::too_many_arguments)]
    pub fn new<A, B, Ct, F>(
        name: impl Into<String>,
        n: usize,
        k: usize,
        m: usize,
        a: A,
        b: B,
        ct: Ct,
        f: F,
    ) -> Result<Self>
    where
        A: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        B: Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
        Ct: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        F: Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        let name = name.into();
        if n == 0 || k == 0 {
            return Err(Error::Model {
                model: name,
                reason: format!("dimensions must satisfy n >= 1 and k >= 1 (got n = {n}, k = {k})"),
            });
        }
        Ok(Self {
            name,
            notes: String::new(),
            n,
            k,
            m,
            a: Arc::new(a),
            b: Arc::new(b),
            ct: Arc::new(ct),
            f: Arc::new(f),
        })
    }

    /// A model whose coefficient maps are all constant (affine `f`).
    pub fn linear(name: impl Into<String>, coeffs: LinearCoefficients) -> Result<Self> {
        let name = name.into();
        let n = coeffs.a.nrows();
        let k = coeffs.ct.nrows();
        let m = coeffs.fu.ncols();
        let bad = |reason: String| Error::Model {
            model: name.clone(),
            reason,
        };
        if coeffs.a.ncols() != n {
            return Err(bad(format!(
                "A must be square, got {}x{}",
                n,
                coeffs.a.ncols()
            )));
        }
        if coeffs.b.len() != n {
            return Err(bad(format!(
                "b must have length {n}, got {}",
                coeffs.b.len()
            )));
        }
        if coeffs.ct.ncols() != n {
            return Err(bad(format!(
                "C' must be {k}x{n}, got {k}x{}",
                coeffs.ct.ncols()
            )));
        }
        if coeffs.fy.shape() != (k, k) {
            return Err(bad(format!(
                "fy must be {k}x{k}, got {:?}",
                coeffs.fy.shape()
            )));
        }
        if coeffs.fu.nrows() != k {
            return Err(bad(format!(
                "fu must have {k} rows, got {}",
                coeffs.fu.nrows()
            )));
        }
        if coeffs.f0.len() != k {
            return Err(bad(format!(
                "f0 must have length {k}, got {}",
                coeffs.f0.len()
            )));
        }
        let LinearCoefficients {
            a,
            b,
            ct,
            fy,
            fu,
            f0,
        } = coeffs;
        let model = Self::new(
            name,
            n,
            k,
            m,
            move |_, _| a.clone(),
            move |_, _| b.clone(),
            move |_| ct.clone(),
            move |y, u| {
                &fy * DVector::from_column_slice(y) + &fu * DVector::from_column_slice(u) + &f0
            },
        )?;
        Ok(model.with_notes("constant coefficients"))
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Which standing hypotheses the model is believed to satisfy.
    pub fn notes(&self) -> &str {
        &self.notes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[allow(non_snake_case)]
    pub fn eval_A(&self, y: &[f64], u: &[f64]) -> DMatrix<f64> {
        (self.a)(y, u)
    }

    pub fn eval_b(&self, y: &[f64], u: &[f64]) -> DVector<f64> {
        (self.b)(y, u)
    }

    /// The `k×n` output coupling `C'(y)`.
    pub fn eval_ct(&self, y: &[f64]) -> DMatrix<f64> {
        (self.ct)(y)
    }

    pub fn eval_f(&self, y: &[f64], u: &[f64]) -> DVector<f64> {
        (self.f)(y, u)
    }

    pub(crate) fn checked_a(&self, y: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.eval_A(y, u);
        self.expect_shape("A", a.shape(), (self.n, self.n))?;
        Ok(a)
    }

    pub(crate) fn checked_b(&self, y: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        let b = self.eval_b(y, u);
        self.expect_shape("b", b.shape(), (self.n, 1))?;
        Ok(b)
    }

    pub(crate) fn checked_ct(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let ct = self.eval_ct(y);
        self.expect_shape("C'", ct.shape(), (self.k, self.n))?;
        Ok(ct)
    }

    pub(crate) fn checked_f(&self, y: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        let f = self.eval_f(y, u);
        self.expect_shape("f", f.shape(), (self.k, 1))?;
        Ok(f)
    }

    fn expect_shape(
        &self,
        what: &str,
        got: (usize, usize),
        expected: (usize, usize),
    ) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::Model {
                model: self.name.clone(),
                reason: format!("{what} returned shape {got:?}, expected {expected:?}"),
            })
        }
    }
}

/// Builds one of the [`CATALOG`] models.
///
/// * `pure-integrator`: `x' = 0`, `y' = x` (`m = 0`).
/// * `harmonic-oscillator`: `x1' = ω x2`, `x2' = −ω x1`, `y' = x1` (`m = 0`, `omega` defaults to 1).
/// * `scalar-nonlinear`: `x' = a x`, `y' = −y + u + c(y) x` with
///   `c(y) = c0 + c2 y²` (`m = 1`; defaults `a = −1`, `c0 = 1`, `c2 = 1`).
pub fn build_catalog_model(name: &str, params: &ModelParams) -> Result<SystemModel> {
    let allowed: &[&str] = match name {
        "pure-integrator" => &[],
        "harmonic-oscillator" => &["omega"],
        "scalar-nonlinear" => &["a", "c0", "c2"],
        other => return Err(Error::Catalog(other.to_string())),
    };
    let invalid = |reason: String| Error::Model {
        model: name.to_string(),
        reason,
    };
    for (key, value) in params {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(format!("unknown parameter `{key}`")));
        }
        if !value.is_finite() {
            return Err(invalid(format!("parameter `{key}` must be finite")));
        }
    }
    let param = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);

    match name {
        "pure-integrator" => SystemModel::linear(
            name,
            LinearCoefficients {
                a: DMatrix::zeros(1, 1),
                b: DVector::zeros(1),
                ct: DMatrix::from_element(1, 1, 1.0),
                fy: DMatrix::zeros(1, 1),
                fu: DMatrix::zeros(1, 0),
                f0: DVector::zeros(1),
            },
        )
        .map(|m| m.with_notes("every window r > 0 distinguishes initial states; locally Lipschitz everywhere; y grows linearly when x0 != 0, so outputs are unbounded")),
        "harmonic-oscillator" => {
            let omega = param("omega", 1.0);
            if omega <= 0.0 {
                return Err(invalid(format!("omega must be positive, got {omega}")));
            }
            SystemModel::linear(
                name,
                LinearCoefficients {
                    a: DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0]),
                    b: DVector::zeros(2),
                    ct: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                    fy: DMatrix::zeros(1, 1),
                    fu: DMatrix::zeros(1, 0),
                    f0: DVector::zeros(1),
                },
            )
            .map(|m| m.with_notes("every window r > 0 distinguishes initial states; locally Lipschitz everywhere; trajectories are periodic and bounded"))
        }
        _ => {
            let a = param("a", -1.0);
            let c0 = param("c0", 1.0);
            let c2 = param("c2", 1.0);
            if c0 <= 0.0 || c2 < 0.0 {
                return Err(invalid(format!(
                    "c(y) = c0 + c2 y^2 must be positive for all y (got c0 = {c0}, c2 = {c2})"
                )));
            }
            SystemModel::new(
                name,
                1,
                1,
                1,
                move |_, _| DMatrix::from_element(1, 1, a),
                |_, _| DVector::zeros(1),
                move |y| DMatrix::from_element(1, 1, c0 + c2 * y[0] * y[0]),
                |y, u| DVector::from_element(1, -y[0] + u[0]),
            )
            .map(|m| m.with_notes("c(y) > 0, so every window distinguishes initial states; locally Lipschitz everywhere; trajectories stay bounded for bounded u when a < 0"))
        }
    }
}

/// Which coefficient map a [`ValidationFailure`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    A,
    B,
    Ct,
    F,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureKind {
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationFailure {
    pub evaluator: Evaluator,
    pub kind: FailureKind,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub probes: usize,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn shape_failures(&self) -> usize {
        self.failures
            .iter()
            .filter(|f| matches!(f.kind, FailureKind::Shape { .. }))
            .count()
    }
}

/// Half-width of the box `(y, u)` probes are drawn from.
const PROBE_RADIUS: f64 = 10.0;

/// Evaluates every coefficient map at `probes` seeded random `(y, u)` points
/// and collects shape mismatches and non-finite outputs.
pub fn validate_model(model: &SystemModel, probes: usize, seed: u64) -> Result<ValidationReport> {
    if probes == 0 {
        return Err(Error::Precondition(
            "validate_model needs at least one probe".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport {
        probes,
        failures: Vec::new(),
    };
    let (n, k) = (model.n(), model.k());

    for _ in 0..probes {
        let y: Vec<f64> = (0..k)
            .map(|_| rng.gen_range(-PROBE_RADIUS..PROBE_RADIUS))
            .collect();
        let u: Vec<f64> = (0..model.m())
            .map(|_| rng.gen_range(-PROBE_RADIUS..PROBE_RADIUS))
            .collect();

        let outputs = [
            (Evaluator::A, (n, n), model.eval_A(&y, &u)),
            (Evaluator::B, (n, 1), {
                let b = model.eval_b(&y, &u);
                DMatrix::from_column_slice(b.len(), 1, b.as_slice())
            }),
            (Evaluator::Ct, (k, n), model.eval_ct(&y)),
            (Evaluator::F, (k, 1), {
                let f = model.eval_f(&y, &u);
                DMatrix::from_column_slice(f.len(), 1, f.as_slice())
            }),
        ];
        for (evaluator, expected, value) in outputs {
            let kind = if value.shape() != expected {
                Some(FailureKind::Shape {
                    expected,
                    got: value.shape(),
                })
            } else if value.iter().any(|v| !v.is_finite()) {
                Some(FailureKind::NonFinite)
            } else {
                None
            };
            if let Some(kind) = kind {
                report.failures.push(ValidationFailure {
                    evaluator,
                    kind,
                    y: y.clone(),
                    u: u.clone(),
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog(name: &str) -> SystemModel {
        build_catalog_model(name, &ModelParams::new()).unwrap()
    }

    #[test]
    fn pure_integrator_has_zero_dynamics() {
        let m = catalog("pure-integrator");
        assert_eq!((m.n(), m.k(), m.m()), (1, 1, 0));
        assert_eq!(m.eval_A(&[3.0], &[]), DMatrix::zeros(1, 1));
        assert_eq!(m.eval_ct(&[-1.0])[(0, 0)], 1.0);
    }

    #[test]
    fn oscillator_output_row() {
        let m = catalog("harmonic-oscillator");
        assert_eq!(
            m.eval_ct(&[0.7]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
        );
        assert_eq!(
            m.eval_A(&[0.0], &[]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        );
    }

    #[test]
    fn scalar_nonlinear_coupling() {
        let m = catalog("scalar-nonlinear");
        assert_eq!(m.eval_ct(&[2.0])[(0, 0)], 5.0);
        assert_eq!(m.eval_f(&[2.0], &[0.5])[0], -1.5);
        assert_eq!(m.eval_A(&[2.0], &[0.5])[(0, 0)], -1.0);
    }

    #[test]
    fn unknown_name_is_catalog_error() {
        let err = build_catalog_model("chemostat", &ModelParams::new()).unwrap_err();
        assert_eq!(err, Error::Catalog("chemostat".into()));
    }

    #[test]
    fn invalid_params_are_model_errors() {
        let mut p = ModelParams::new();
        p.insert("c0".into(), -1.0);
        assert!(matches!(
            build_catalog_model("scalar-nonlinear", &p),
            Err(Error::Model { .. })
        ));

        let mut p = ModelParams::new();
        p.insert("omega".into(), 0.0);
        assert!(matches!(
            build_catalog_model("harmonic-oscillator", &p),
            Err(Error::Model { .. })
        ));

        let mut p = ModelParams::new();
        p.insert("gain".into(), 1.0);
        assert!(matches!(
            build_catalog_model("pure-integrator", &p),
            Err(Error::Model { .. })
        ));
    }

    #[test]
    fn zero_dimensions_rejected() {
        let r = SystemModel::new(
            "empty",
            0,
            1,
            0,
            |_, _| DMatrix::zeros(0, 0),
            |_, _| DVector::zeros(0),
            |_| DMatrix::zeros(1, 0),
            |_, _| DVector::zeros(1),
        );
        assert!(r.is_err());
    }

    #[test]
    fn catalog_models_validate_clean() {
        for name in CATALOG {
            let report = validate_model(&catalog(name), 100, 7).unwrap();
            assert!(report.is_ok(), "{name}: {:?}", report.failures);
        }
    }

    #[test]
    fn wrong_b_length_is_reported() {
        let m = SystemModel::new(
            "broken",
            2,
            1,
            0,
            |_, _| DMatrix::zeros(2, 2),
            |_, _| DVector::zeros(3),
            |_| DMatrix::zeros(1, 2),
            |_, _| DVector::zeros(1),
        )
        .unwrap();
        let report = validate_model(&m, 1, 0).unwrap();
        assert_eq!(report.shape_failures(), 1);
        assert_eq!(report.failures[0].evaluator, Evaluator::B);
    }

    #[test]
    fn non_finite_output_is_reported() {
        let m = SystemModel::new(
            "nan",
            1,
            1,
            0,
            |_, _| DMatrix::from_element(1, 1, f64::NAN),
            |_, _| DVector::zeros(1),
            |_| DMatrix::zeros(1, 1),
            |_, _| DVector::zeros(1),
        )
        .unwrap();
        let report = validate_model(&m, 3, 1).unwrap();
        assert_eq!(report.failures.len(), 3);
        assert!(report
            .failures
            .iter()
            .all(|f| f.kind == FailureKind::NonFinite));
    }

    #[test]
    fn zero_probes_rejected() {
        assert!(validate_model(&catalog("pure-integrator"), 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn scalar_nonlinear_coupling_at_least_one(y in -1e6f64..1e6) {
            let m = catalog("scalar-nonlinear");
            prop_assert!(m.eval_ct(&[y])[(0, 0)] >= 1.0);
        }

        #[test]
        fn catalog_outputs_finite_and_shaped(y in -1e3f64..1e3, u in -1e3f64..1e3) {
            for name in CATALOG {
                let m = catalog(name);
                let yv = vec![y; m.k()];
                let uv = vec![u; m.m()];
                prop_assert!(m.checked_a(&yv, &uv).unwrap().iter().all(|v| v.is_finite()));
                prop_assert!(m.checked_b(&yv, &uv).unwrap().iter().all(|v| v.is_finite()));
                prop_assert!(m.checked_ct(&yv).unwrap().iter().all(|v| v.is_finite()));
                prop_assert!(m.checked_f(&yv, &uv).unwrap().iter().all(|v| v.is_finite()));
            }
        }
    }
}
