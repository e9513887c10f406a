//! Linear finite element assembly for the Poisson model problems.
//!
//! Both dimensions use a uniform grid with `n` nodes per direction and
//! spacing `h = L / (n - 1)`. Stiffness matrices are assembled element by
//! element (two-node segments in 1D, right triangles in 2D) and kept at
//! O(1) entry size: the 1D stiffness is multiplied by `h`, and the 2D one is
//! already scale free. The unit source therefore enters the load vector as
//! `h²` per interior node. Homogeneous Dirichlet nodes are eliminated; the
//! remaining boundary carries the natural (zero flux) condition.

use std::fmt;
use std::str::FromStr;

use crate::error::{QrlsError, Result};
use crate::linalg::{DenseOracle, DenseVector, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    A,
    B,
    C,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "a",
            Case::B => "b",
            Case::C => "c",
        })
    }
}

impl FromStr for Case {
    type Err = QrlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Case::A),
            "b" => Ok(Case::B),
            "c" => Ok(Case::C),
            other => Err(QrlsError::InvalidArgument(format!(
                "unknown case label '{other}'"
            ))),
        }
    }
}

/// Which Poisson problem to assemble.
///
/// 1D: case `a` fixes `u(0) = u(L) = 0`, case `b` fixes only `u(0) = 0`.
/// 2D: the Dirichlet edges are `{x=0, y=0, x=L}` for `a`, `{x=0, y=0}` for
/// `b` and `{x=0}` for `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub case: Case,
    pub n_nodes_per_dim: usize,
    pub length: f64,
}

impl ProblemSpec {
    pub fn new(dim: usize, case: Case, n_nodes_per_dim: usize) -> Result<Self> {
        let spec = Self {
            dim,
            case,
            n_nodes_per_dim,
            length: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn one_d(case: Case, n: usize) -> Result<Self> {
        Self::new(1, case, n)
    }

    pub fn two_d(case: Case, n: usize) -> Result<Self> {
        Self::new(2, case, n)
    }

    pub fn with_length(mut self, length: f64) -> Result<Self> {
        self.length = length;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let valid_case = match self.dim {
            1 => matches!(self.case, Case::A | Case::B),
            2 => true,
            d => {
                return Err(QrlsError::InvalidArgument(format!(
                    "dimension must be 1 or 2, got {d}"
                )))
            }
        };
        if !valid_case {
            return Err(QrlsError::InvalidCase {
                label: self.case.to_string(),
                dim: self.dim,
            });
        }
        if self.n_nodes_per_dim < 3 {
            return Err(QrlsError::InvalidArgument(format!(
                "need at least 3 nodes per dimension, got {}",
                self.n_nodes_per_dim
            )));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(QrlsError::InvalidArgument(format!(
                "domain length must be positive, got {}",
                self.length
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_nodes_per_dim - 1) as f64
    }

    /// Whether grid node `(i, j)` lies on the Dirichlet boundary. In 1D `j`
    /// is ignored.
    fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        let last = self.n_nodes_per_dim - 1;
        match (self.dim, self.case) {
            (1, Case::A) => i == 0 || i == last,
            (1, _) => i == 0,
            (_, Case::A) => i == 0 || j == 0 || i == last,
            (_, Case::B) => i == 0 || j == 0,
            (_, Case::C) => i == 0,
        }
    }

    /// Grid coordinates `(i, j)` of the retained degrees of freedom, in
    /// assembly order (row-major: `j` outer, `i` inner).
    pub fn dof_nodes(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes_per_dim;
        let rows = if self.dim == 1 { 1 } else { n };
        (0..rows)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter(|&(i, j)| !self.is_dirichlet(i, j))
            .collect()
    }

    pub fn dof_count(&self) -> usize {
        self.dof_nodes().len()
    }

    /// Physical coordinates of the retained degrees of freedom.
    pub fn dof_coordinates(&self) -> Vec<(f64, f64)> {
        let h = self.spacing();
        self.dof_nodes()
            .into_iter()
            .map(|(i, j)| (i as f64 * h, j as f64 * h))
            .collect()
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D-{} n={}", self.dim, self.case, self.n_nodes_per_dim)
    }
}

/// Assembles `(A, b)` for either dimension.
pub fn assemble(spec: &ProblemSpec) -> Result<(SparseMatrix, DenseVector)> {
    match spec.dim {
        1 => assemble_1d(spec),
        _ => assemble_2d(spec),
    }
}

pub fn assemble_1d(spec: &ProblemSpec) -> Result<(SparseMatrix, DenseVector)> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(QrlsError::InvalidArgument(format!(
            "assemble_1d called with a {}D problem",
            spec.dim
        )));
    }
    let n = spec.n_nodes_per_dim;
    let h = spec.spacing();
    let elements = (0..n - 1).map(|e| {
        // h-scaled segment stiffness [[1, -1], [-1, 1]]; consistent load h/2
        // per node, times the same h.
        (
            vec![(e, 0), (e + 1, 0)],
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            vec![h * h / 2.0; 2],
        )
    });
    scatter(spec, elements)
}

pub fn assemble_2d(spec: &ProblemSpec) -> Result<(SparseMatrix, DenseVector)> {
    spec.validate()?;
    if spec.dim != 2 {
        return Err(QrlsError::InvalidArgument(format!(
            "assemble_2d called with a {}D problem",
            spec.dim
        )));
    }
    let n = spec.n_nodes_per_dim;
    let h = spec.spacing();
    let mut elements = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let lower = [(i, j), (i + 1, j), (i + 1, j + 1)];
            let upper = [(i, j), (i + 1, j + 1), (i, j + 1)];
            for tri in [lower, upper] {
                let (k, area) = triangle_stiffness(&tri);
                elements.push((tri.to_vec(), k, vec![area * h * h / 3.0; 3]));
            }
        }
    }
    scatter(spec, elements.into_iter())
}

/// P1 stiffness of a triangle given in grid units, plus its area (also in
/// grid units). The Laplacian stiffness is invariant under uniform scaling.
fn triangle_stiffness(nodes: &[(usize, usize); 3]) -> (Vec<Vec<f64>>, f64) {
    let p: Vec<(f64, f64)> = nodes.iter().map(|&(i, j)| (i as f64, j as f64)).collect();
    let (x10, y10) = (p[1].0 - p[0].0, p[1].1 - p[0].1);
    let (x20, y20) = (p[2].0 - p[0].0, p[2].1 - p[0].1);
    let det = x10 * y20 - x20 * y10;
    let area = det.abs() / 2.0;
    // Inverse-transpose of [[x10, x20], [y10, y20]] applied to the reference
    // gradients (-1,-1), (1,0), (0,1).
    let inv_t = [[y20 / det, -y10 / det], [-x20 / det, x10 / det]];
    let reference = [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)];
    let grads: Vec<(f64, f64)> = reference
        .iter()
        .map(|&(gx, gy)| {
            (
                inv_t[0][0] * gx + inv_t[0][1] * gy,
                inv_t[1][0] * gx + inv_t[1][1] * gy,
            )
        })
        .collect();
    let k = (0..3)
        .map(|a| {
            (0..3)
                .map(|b| area * (grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1))
                .collect()
        })
        .collect();
    (k, area)
}

type Element = (Vec<(usize, usize)>, Vec<Vec<f64>>, Vec<f64>);

fn scatter(
    spec: &ProblemSpec,
    elements: impl Iterator<Item = Element>,
) -> Result<(SparseMatrix, DenseVector)> {
    let n = spec.n_nodes_per_dim;
    let rows = if spec.dim == 1 { 1 } else { n };
    let mut dof_of = vec![None; n * rows];
    for (k, (i, j)) in spec.dof_nodes().into_iter().enumerate() {
        dof_of[j * n + i] = Some(k);
    }
    let n_dof = dof_of.iter().flatten().count();
    let mut triplets = Vec::new();
    let mut load = DenseVector::zeros(n_dof);
    for (nodes, k, f) in elements {
        let dofs: Vec<Option<usize>> = nodes.iter().map(|&(i, j)| dof_of[j * n + i]).collect();
        for (a, da) in dofs.iter().enumerate() {
            let Some(da) = *da else { continue };
            load[da] += f[a];
            for (b, db) in dofs.iter().enumerate() {
                if let Some(db) = *db {
                    triplets.push((da, db, k[a][b]));
                }
            }
        }
    }
    Ok((SparseMatrix::from_triplets(n_dof, n_dof, triplets)?, load))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMethod {
    Gershgorin,
    DenseExact,
    Analytic,
    /// Values provided by the caller.
    Supplied,
}

/// Bounds `a ≤ λ_min` (smallest nonzero eigenvalue) and `λ_max ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub a: f64,
    pub b: f64,
    pub method: BoundsMethod,
}

impl SpectralBounds {
    pub fn supplied(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            method: BoundsMethod::Supplied,
        }
    }

    /// `b / a`; infinite when no positive lower bound is known.
    pub fn condition_number(&self) -> f64 {
        if self.a > 0.0 {
            self.b / self.a
        } else {
            f64::INFINITY
        }
    }

    /// Replace the lower bound, e.g. after a Gershgorin estimate of `b`.
    pub fn with_lower(self, a: f64) -> Self {
        Self { a, ..self }
    }
}

/// Relative threshold below which a dense eigenvalue counts as zero.
pub const ZERO_EIGENVALUE_THRESHOLD: f64 = 1e-10;

pub fn spectral_bounds(a: &SparseMatrix, method: BoundsMethod) -> Result<SpectralBounds> {
    spectral_bounds_with(a, method, &DenseOracle::default())
}

pub fn spectral_bounds_with(
    a: &SparseMatrix,
    method: BoundsMethod,
    oracle: &DenseOracle,
) -> Result<SpectralBounds> {
    if !a.is_symmetric() {
        return Err(QrlsError::InvalidArgument(
            "spectral bounds require a symmetric matrix".into(),
        ));
    }
    match method {
        BoundsMethod::Gershgorin => Ok(gershgorin(a)),
        BoundsMethod::DenseExact => dense_exact(a, oracle),
        BoundsMethod::Analytic => analytic(a),
        BoundsMethod::Supplied => Err(QrlsError::InvalidArgument(
            "supplied bounds cannot be computed from a matrix".into(),
        )),
    }
}

fn gershgorin(a: &SparseMatrix) -> SpectralBounds {
    let mut lower = f64::INFINITY;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        let off: f64 = cols
            .iter()
            .zip(vals)
            .filter(|(&j, _)| j != i)
            .map(|(_, v)| v.abs())
            .sum();
        lower = lower.min(a.get(i, i) - off);
    }
    SpectralBounds {
        a: lower.max(0.0),
        b: a.max_abs_row_sum(),
        method: BoundsMethod::Gershgorin,
    }
}

fn dense_exact(a: &SparseMatrix, oracle: &DenseOracle) -> Result<SpectralBounds> {
    let eig = oracle.symmetric_eigenvalues(a)?;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = ZERO_EIGENVALUE_THRESHOLD * max;
    if let Some(&neg) = eig.iter().find(|&&v| v < -threshold) {
        return Err(QrlsError::InvalidArgument(format!(
            "matrix is indefinite (eigenvalue {neg:e})"
        )));
    }
    let smallest = eig
        .iter()
        .copied()
        .find(|&v| v > threshold)
        .ok_or_else(|| QrlsError::InvalidArgument("matrix has no nonzero eigenvalue".into()))?;
    Ok(SpectralBounds {
        a: smallest,
        b: *eig.last().expect("nonempty"),
        method: BoundsMethod::DenseExact,
    })
}

/// Closed-form spectrum of the 1D stencils: `tridiag(-1, 2, -1)` has
/// eigenvalues `2 - 2cos(kπ/(m+1))`; with the last diagonal entry replaced by
/// 1 (free right end) they become `2 - 2cos((2k-1)π/(2m+1))`.
fn analytic(a: &SparseMatrix) -> Result<SpectralBounds> {
    let m = a.n_rows();
    let free_end = m > 0 && a.get(m - 1, m - 1) == 1.0;
    let stencil_ok = m > 0
        && a.nnz() == 3 * m - 2
        && (0..m).all(|i| {
            let diag_ok = a.get(i, i)
                == if free_end && i == m - 1 && m > 1 {
                    1.0
                } else {
                    2.0
                };
            let off_ok = i + 1 >= m || (a.get(i, i + 1) == -1.0 && a.get(i + 1, i) == -1.0);
            diag_ok && off_ok
        });
    if !stencil_ok {
        return Err(QrlsError::UnsupportedAnalytic(
            "matrix is not a 1D tridiagonal Poisson stencil".into(),
        ));
    }
    let pi = std::f64::consts::PI;
    let lambda = |k: usize| {
        let theta = if free_end && m > 1 {
            (2 * k - 1) as f64 * pi / (2 * m + 1) as f64
        } else {
            k as f64 * pi / (m + 1) as f64
        };
        2.0 - 2.0 * theta.cos()
    };
    Ok(SpectralBounds {
        a: lambda(1),
        b: lambda(m),
        method: BoundsMethod::Analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn one_d_case_a_is_stencil_with_h_squared_load() {
        let spec = ProblemSpec::one_d(Case::A, 6).unwrap();
        let (a, b) = assemble_1d(&spec).unwrap();
        assert_eq!(a, SparseMatrix::tridiagonal(4, -1.0, 2.0));
        let h = 0.2;
        for v in b.iter() {
            assert!(close(*v, h * h, 1e-15));
        }
    }

    #[test]
    fn one_d_single_interior_node() {
        let spec = ProblemSpec::one_d(Case::A, 3).unwrap();
        let (a, b) = assemble_1d(&spec).unwrap();
        assert_eq!(a.to_dense_rows(), vec![vec![2.0]]);
        assert!(close(b[0], 0.25, 1e-15));
    }

    #[test]
    fn one_d_case_b_has_free_end() {
        let spec = ProblemSpec::one_d(Case::B, 4).unwrap();
        let (a, b) = assemble_1d(&spec).unwrap();
        assert_eq!(a.n_rows(), 3);
        assert_eq!(a.to_dense_rows()[2], vec![0.0, -1.0, 1.0]);
        let h = 1.0 / 3.0;
        assert!(close(b[2], h * h / 2.0, 1e-15));
        assert!(close(b[0], h * h, 1e-15));
    }

    #[test]
    fn invalid_case_for_1d() {
        let err = ProblemSpec::one_d(Case::C, 5).unwrap_err();
        assert!(matches!(err, QrlsError::InvalidCase { dim: 1, .. }));
        assert!(ProblemSpec::one_d(Case::A, 2).is_err());
        assert!("d".parse::<Case>().is_err());
    }

    #[test]
    fn two_d_case_b_three_by_three() {
        let spec = ProblemSpec::two_d(Case::B, 3).unwrap();
        let (a, _) = assemble_2d(&spec).unwrap();
        assert_eq!(a.n_rows(), 4);
        // Retained nodes in order: (1,1) (2,1) (1,2) (2,2).
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(3, 3), 1.0);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 3), -0.5);
    }

    #[test]
    fn two_d_dof_counts() {
        assert_eq!(ProblemSpec::two_d(Case::A, 4).unwrap().dof_count(), 6);
        assert_eq!(ProblemSpec::two_d(Case::B, 5).unwrap().dof_count(), 16);
        assert_eq!(ProblemSpec::two_d(Case::C, 4).unwrap().dof_count(), 12);
    }

    #[test]
    fn m_matrix_structure() {
        for spec in [
            ProblemSpec::one_d(Case::A, 7).unwrap(),
            ProblemSpec::one_d(Case::B, 7).unwrap(),
            ProblemSpec::two_d(Case::A, 6).unwrap(),
            ProblemSpec::two_d(Case::B, 6).unwrap(),
            ProblemSpec::two_d(Case::C, 6).unwrap(),
        ] {
            let (a, _) = assemble(&spec).unwrap();
            assert!(a.is_symmetric(), "{spec}");
            for (i, j, v) in a.triplets() {
                assert!(i == j || v <= 0.0, "{spec}: positive off-diagonal");
            }
            for i in 0..a.n_rows() {
                assert!(a.row(i).1.iter().sum::<f64>() >= -1e-14, "{spec}: row sum");
            }
        }
    }

    #[test]
    fn tridiagonal_spectrum_dense_matches_analytic() {
        let a = SparseMatrix::tridiagonal(4, -1.0, 2.0);
        let dense = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let exact = spectral_bounds(&a, BoundsMethod::Analytic).unwrap();
        let pi = std::f64::consts::PI;
        assert!(close(dense.a, 2.0 - 2.0 * (pi / 5.0).cos(), 1e-12));
        assert!(close(dense.b, 2.0 - 2.0 * (4.0 * pi / 5.0).cos(), 1e-12));
        assert!(close(dense.a, 0.381966, 1e-6) && close(dense.b, 3.618034, 1e-6));
        assert!(close(exact.a, dense.a, 1e-13) && close(exact.b, dense.b, 1e-13));
    }

    #[test]
    fn free_end_analytic_spectrum() {
        let spec = ProblemSpec::one_d(Case::B, 9).unwrap();
        let (a, _) = assemble(&spec).unwrap();
        let dense = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let exact = spectral_bounds(&a, BoundsMethod::Analytic).unwrap();
        assert!(close(exact.a, dense.a, 1e-12) && close(exact.b, dense.b, 1e-12));
    }

    #[test]
    fn identity_and_gershgorin() {
        let id = spectral_bounds(&SparseMatrix::identity(8), BoundsMethod::DenseExact).unwrap();
        assert!(close(id.a, 1.0, 1e-12) && close(id.b, 1.0, 1e-12));
        let g = spectral_bounds(
            &SparseMatrix::tridiagonal(5, -1.0, 2.0),
            BoundsMethod::Gershgorin,
        )
        .unwrap();
        assert_eq!(g.b, 4.0);
        assert_eq!(g.a, 0.0);
    }

    #[test]
    fn analytic_refuses_2d() {
        let (a, _) = assemble(&ProblemSpec::two_d(Case::B, 4).unwrap()).unwrap();
        assert!(matches!(
            spectral_bounds(&a, BoundsMethod::Analytic),
            Err(QrlsError::UnsupportedAnalytic(_))
        ));
    }

    #[test]
    fn dense_exact_skips_null_space() {
        // Periodic stencil: one zero eigenvalue.
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.0));
        }
        let a = SparseMatrix::from_triplets(n, n, t).unwrap();
        let bounds = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let expected = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!(close(bounds.a, expected, 1e-12));
        assert!(close(bounds.b, 4.0, 1e-12));
    }
}
