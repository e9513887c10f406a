//! Dense verification oracles.
//!
//! Every routine converts its sparse input to a dense matrix and runs a full
//! decomposition, so each one is guarded by a row cap. These are the ground
//! truth the rest of the crate is tested against, not production solvers.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

use crate::error::{QrlsError, Result};

use super::sparse::SparseMatrix;
use super::vector::DenseVector;

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct DenseOracle {
    pub max_rows: usize,
}

impl Default for DenseOracle {
    fn default() -> Self {
        Self {
            max_rows: DEFAULT_DENSE_CAP,
        }
    }
}

impl DenseOracle {
    pub fn with_cap(max_rows: usize) -> Self {
        Self { max_rows }
    }

    fn check_cap(&self, op: &'static str, a: &SparseMatrix) -> Result<()> {
        let rows = a.n_rows().max(a.n_cols());
        if rows > self.max_rows {
            return Err(QrlsError::SizeCapExceeded {
                op,
                rows,
                cap: self.max_rows,
            });
        }
        Ok(())
    }

    /// All singular values, nonincreasing.
    pub fn singular_values(&self, a: &SparseMatrix) -> Result<Vec<f64>> {
        self.check_cap("dense_singular_values", a)?;
        to_faer(a)
            .singular_values()
            .map_err(|_| QrlsError::NoConvergence { op: "svd" })
    }

    /// `(σ_min, σ_max)` of a matrix via a dense SVD.
    pub fn singular_bounds(&self, a: &SparseMatrix) -> Result<(f64, f64)> {
        let s = self.singular_values(a)?;
        match (s.last(), s.first()) {
            (Some(&min), Some(&max)) => Ok((min, max)),
            _ => Err(QrlsError::InvalidArgument(
                "empty matrix has no singular values".into(),
            )),
        }
    }

    /// Eigenvalues of a symmetric matrix, nondecreasing. Only the lower
    /// triangle is read.
    pub fn symmetric_eigenvalues(&self, a: &SparseMatrix) -> Result<Vec<f64>> {
        self.check_cap("dense_symmetric_eigenvalues", a)?;
        square(a, "dense_symmetric_eigenvalues")?;
        to_faer(a)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| QrlsError::NoConvergence {
                op: "symmetric eigen",
            })
    }

    /// Eigenvalues and orthonormal eigenvectors (as columns, row-major
    /// `vectors[row][k]`) of a symmetric matrix.
    pub fn symmetric_eigen(&self, a: &SparseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_cap("dense_symmetric_eigen", a)?;
        let n = square(a, "dense_symmetric_eigen")?;
        let evd =
            to_faer(a)
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| QrlsError::NoConvergence {
                    op: "symmetric eigen",
                })?;
        let s = evd.S();
        let u = evd.U();
        let values = (0..n).map(|k| s[k]).collect();
        let vectors = (0..n)
            .map(|i| (0..n).map(|k| u[(i, k)]).collect())
            .collect();
        Ok((values, vectors))
    }

    /// Dense solve of `A x = b`.
    ///
    /// Lower-triangular inputs are solved by forward substitution; anything
    /// else goes through LU with partial pivoting.
    pub fn solve(&self, a: &SparseMatrix, b: &[f64]) -> Result<DenseVector> {
        self.check_cap("dense_solve", a)?;
        let n = square(a, "dense_solve")?;
        if b.len() != n {
            return Err(QrlsError::DimensionMismatch {
                op: "dense_solve",
                expected: n,
                found: b.len(),
            });
        }
        if a.is_lower_triangular() {
            return forward_substitution(a, b);
        }
        let lu = to_faer(a).partial_piv_lu();
        let u = lu.U();
        let (mut umin, mut umax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let v = u[(i, i)].abs();
            umin = umin.min(v);
            umax = umax.max(v);
        }
        if umax == 0.0 || umin <= umax * f64::EPSILON * n as f64 {
            return Err(QrlsError::Singular {
                condition_estimate: if umin == 0.0 {
                    f64::INFINITY
                } else {
                    umax / umin
                },
            });
        }
        let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        let out: DenseVector = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(QrlsError::Singular {
                condition_estimate: f64::INFINITY,
            });
        }
        Ok(out)
    }

    /// Explicit dense inverse, row-major.
    pub fn inverse(&self, a: &SparseMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_cap("dense_inverse", a)?;
        let n = square(a, "dense_inverse")?;
        let inv = to_faer(a).partial_piv_lu().inverse();
        Ok((0..n)
            .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
            .collect())
    }
}

fn square(a: &SparseMatrix, op: &'static str) -> Result<usize> {
    if !a.is_square() {
        return Err(QrlsError::NotSquare {
            op,
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    Ok(a.n_rows())
}

fn to_faer(a: &SparseMatrix) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] = v;
    }
    m
}

fn forward_substitution(a: &SparseMatrix, b: &[f64]) -> Result<DenseVector> {
    let n = a.n_rows();
    let dense = a.to_dense_rows();
    let diag_max = (0..n).map(|i| dense[i][i].abs()).fold(0.0, f64::max);
    let mut x = vec![0.0; n];
    for i in 0..n {
        let pivot = dense[i][i];
        if pivot == 0.0 {
            return Err(QrlsError::Singular {
                condition_estimate: f64::INFINITY,
            });
        }
        let partial: f64 = dense[i][..i].iter().zip(&x[..i]).map(|(m, v)| m * v).sum();
        x[i] = (b[i] - partial) / pivot;
        if pivot.abs() <= diag_max * f64::EPSILON * n as f64 {
            return Err(QrlsError::Singular {
                condition_estimate: diag_max / pivot.abs(),
            });
        }
    }
    Ok(DenseVector::new(x))
}

pub fn dense_singular_bounds(a: &SparseMatrix) -> Result<(f64, f64)> {
    DenseOracle::default().singular_bounds(a)
}

pub fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Result<DenseVector> {
    DenseOracle::default().solve(a, b)
}

pub fn dense_symmetric_eigenvalues(a: &SparseMatrix) -> Result<Vec<f64>> {
    DenseOracle::default().symmetric_eigenvalues(a)
}

/// Spectral norm `‖A‖₂`.
pub fn dense_norm(a: &SparseMatrix) -> Result<f64> {
    Ok(dense_singular_bounds(a)?.1)
}
