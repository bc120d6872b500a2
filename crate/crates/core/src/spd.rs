//! Symmetric positive definite covariance matrices and their functional calculus.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::error::{shape, Error, Result};

/// Eigenvalues below this multiple of the operator norm count as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SpdCovariance {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpdCovariance {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(shape(format!(
                "covariance must be square and non-empty, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "covariance has non-finite entries".into(),
            ));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let top = eig.eigenvalues.max();
        let bottom = eig.eigenvalues.min();
        if top.is_nan() || top <= 0.0 || bottom <= EIGEN_FLOOR * top {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {bottom:e}, largest {top:e}"
            )));
        }
        Ok(Self {
            matrix: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(shape(
                "covariance rows must all have the same length as the row count",
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Operator norm `||C||`.
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues.max()
    }

    /// Operator norm of the inverse, `||C^-1||`.
    pub fn inv_op_norm(&self) -> f64 {
        1.0 / self.eigenvalues.min()
    }

    pub fn condition_number(&self) -> f64 {
        self.op_norm() * self.inv_op_norm()
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.eigenvalues.map(f));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.apply(|l| 1.0 / l)
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.apply(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        self.apply(|l| 1.0 / l.sqrt())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

impl Serialize for SpdCovariance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}
