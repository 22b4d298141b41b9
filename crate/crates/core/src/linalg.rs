//! Dense Cholesky factorization for the small symmetric systems the
//! estimator solves.

use nalgebra::{DMatrix, DVector};

/// Outcome of a Cholesky attempt on a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyAttempt {
    /// Lower factor, present only if every pivot was positive.
    pub factor: Option<DMatrix<f64>>,
    /// Smallest pivot divided by the largest diagonal entry. Zero or
    /// negative when the factorization broke down.
    pub min_pivot: f64,
}

pub fn cholesky(a: &DMatrix<f64>) -> CholeskyAttempt {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let scale = a.diagonal().iter().fold(0.0f64, |m, &d| m.max(d));
    if !(scale > 0.0) || !scale.is_finite() {
        return CholeskyAttempt {
            factor: None,
            min_pivot: 0.0,
        };
    }

    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(pivot / scale);
        if !(pivot > 0.0) {
            return CholeskyAttempt {
                factor: None,
                min_pivot: min_pivot.min(0.0),
            };
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    CholeskyAttempt {
        factor: Some(l),
        min_pivot,
    }
}

/// Solves `L L' x = b` by forward then backward substitution.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut z = b.clone();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn factors_known_matrix() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0],
        );
        let c = cholesky(&a);
        let l = c.factor.unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 6.0, 1.0, 0.0, -8.0, 5.0, 3.0]);
        assert!((l - expected).abs().max() < 1e-12);
        // pivots 4, 1, 9 over max diagonal 98
        assert!((c.min_pivot - 1.0 / 98.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_indefinite_matrices_fail() {
        let z = cholesky(&DMatrix::zeros(2, 2));
        assert!(z.factor.is_none());
        assert_eq!(z.min_pivot, 0.0);

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let c = cholesky(&a);
        assert!(c.factor.is_none());
        assert!(c.min_pivot < 0.0);
    }

    proptest! {
        #[test]
        fn solves_spd_systems(entries in prop::collection::vec(-3.0f64..3.0, 9), rhs in prop::collection::vec(-5.0f64..5.0, 3)) {
            let m = DMatrix::from_row_slice(3, 3, &entries);
            let a = &m * m.transpose() + DMatrix::identity(3, 3);
            let b = DVector::from_vec(rhs);
            let l = cholesky(&a).factor.unwrap();
            let x = cholesky_solve(&l, &b);
            prop_assert!((&a * &x - &b).norm() < 1e-9 * (1.0 + b.norm()));
        }
    }
}
