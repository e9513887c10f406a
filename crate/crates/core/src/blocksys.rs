//! Block-bidiagonal embedding of `l` relaxation steps plus `c` copies.
//!
//! ```text
//!   M_{l,c} = Σ_{i=0}^{l+c} |i⟩⟨i| ⊗ I − Σ_{i=1}^{l} |i⟩⟨i−1| ⊗ R_i − Σ_{i=l+1}^{l+c} |i⟩⟨i−1| ⊗ I
//!   y       = |0⟩ x_in + Σ_{i=1}^{l} |i⟩ τ_i C⁻¹ b
//! ```
//!
//! Forward substitution on `M x = y` reproduces the relaxation trajectory in
//! blocks `0..=l` and repeats the final iterate in blocks `l+1..=l+c`.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{QrlsError, Result};
use crate::iterate::{inverse_preconditioner, Scheme, StepSizes};
use crate::linalg::{
    write_matrix_market, write_vector_market, DenseOracle, DenseVector, SparseMatrix,
};

/// Relative slack when comparing computed norms with the analytic bounds.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub l: usize,
    pub c: usize,
    /// Size of one block (number of unknowns of the original system).
    pub n: usize,
    pub m: SparseMatrix,
    pub y: DenseVector,
    pub steps: StepSizes,
    pub norm_x_in: f64,
    pub norm_b: f64,
}

impl BlockSystem {
    pub fn new(
        a: &SparseMatrix,
        b: &[f64],
        x_in: &[f64],
        scheme: &Scheme,
        l: usize,
        c: usize,
    ) -> Result<Self> {
        let m = build_block_matrix(a, scheme, l, c)?;
        let y = build_rhs_for_scheme(a, b, x_in, scheme, l, c)?;
        Ok(Self {
            l,
            c,
            n: a.n_rows(),
            m,
            y,
            steps: scheme.steps.clone(),
            norm_x_in: crate::linalg::norm2(x_in),
            norm_b: crate::linalg::norm2(b),
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.l + self.c + 1
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.n
    }

    pub fn norm_y(&self) -> f64 {
        self.y.norm()
    }

    /// Indices `l..=l+c` of the blocks holding the final iterate.
    pub fn success_range(&self) -> std::ops::RangeInclusive<usize> {
        self.l..=self.l + self.c
    }

    /// `⌈log₂(l+c+1)⌉` qubits for the index register.
    pub fn index_qubits(&self) -> usize {
        ceil_log2(self.n_blocks())
    }

    /// `⌈log₂ N⌉` qubits for the system register.
    pub fn system_qubits(&self) -> usize {
        ceil_log2(self.n)
    }

    /// Writes `M` and `y` in Matrix Market form next to a `key = value`
    /// metadata file. Returns the three paths written.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 3]> {
        let matrix = dir.join(format!("{stem}.mtx"));
        let rhs = dir.join(format!("{stem}_rhs.mtx"));
        let meta = dir.join(format!("{stem}.meta"));
        write_matrix_market(
            &self.m,
            std::io::BufWriter::new(std::fs::File::create(&matrix)?),
        )?;
        write_vector_market(
            &self.y,
            std::io::BufWriter::new(std::fs::File::create(&rhs)?),
        )?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&meta)?);
        w.write_all(self.metadata().as_bytes())?;
        w.flush()?;
        Ok([matrix, rhs, meta])
    }

    pub fn metadata(&self) -> String {
        let tau = match &self.steps {
            StepSizes::Stationary(t) => format!("{t:e}"),
            StepSizes::Chebyshev(ts) => ts
                .iter()
                .map(|t| format!("{t:e}"))
                .collect::<Vec<_>>()
                .join(","),
        };
        format!(
            "l = {}\nc = {}\nN = {}\ntau = {}\n",
            self.l, self.c, self.n, tau
        )
    }
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// View of block `i` (length `n`) inside a stacked vector.
pub fn block(v: &[f64], i: usize, n: usize) -> &[f64] {
    &v[i * n..(i + 1) * n]
}

/// Checks that every `R_k = I − τ_k C⁻¹A` has norm at most one, and returns
/// the diagonal of `C⁻¹` (`None` for the identity).
fn certify(a: &SparseMatrix, scheme: &Scheme) -> Result<Option<Vec<f64>>> {
    if !a.is_square() {
        return Err(QrlsError::NotSquare {
            op: "build_block_matrix",
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    if !a.is_symmetric() {
        return Err(QrlsError::InvalidArgument(
            "block embedding requires a symmetric positive-semidefinite A".into(),
        ));
    }
    if scheme.bounds.a < 0.0 {
        return Err(QrlsError::InvalidArgument(format!(
            "negative lower spectral bound {} (A must be semidefinite)",
            scheme.bounds.a
        )));
    }
    let cinv = inverse_preconditioner(a, scheme.preconditioner)?;
    if let Some(d) = &cinv {
        // C⁻¹A is symmetric, and ‖R‖ follows from its spectrum, only when the
        // diagonal is constant.
        if d.iter().any(|v| *v != d[0]) {
            return Err(QrlsError::ContractionViolation {
                quantity: "Jacobi iteration matrix with non-constant diagonal (‖R‖ uncertifiable)",
                value: f64::INFINITY,
                bound: 1.0,
            });
        }
    }
    let tl = scheme.max_tau_lambda();
    if tl > 2.0 * (1.0 + BOUND_SLACK) {
        return Err(QrlsError::ContractionViolation {
            quantity: "τ·λ_max",
            value: tl,
            bound: 2.0,
        });
    }
    Ok(cinv)
}

pub fn build_block_matrix(
    a: &SparseMatrix,
    scheme: &Scheme,
    l: usize,
    c: usize,
) -> Result<SparseMatrix> {
    if l == 0 {
        return Err(QrlsError::InvalidArgument(
            "block system needs l ≥ 1".into(),
        ));
    }
    let cinv = certify(a, scheme)?;
    if let StepSizes::Chebyshev(ts) = &scheme.steps {
        if ts.len() < l {
            return Err(QrlsError::InvalidArgument(format!(
                "scheme provides {} step sizes, {l} required",
                ts.len()
            )));
        }
    }
    let n = a.n_rows();
    let blocks = l + c + 1;
    let mut t = Vec::with_capacity(blocks * n + l * (a.nnz() + n) + c * n);
    for i in 0..blocks {
        for k in 0..n {
            t.push((i * n + k, i * n + k, 1.0));
        }
    }
    for i in 1..=l {
        let tau = scheme.tau(i - 1).expect("length checked");
        let (row0, col0) = (i * n, (i - 1) * n);
        // −R_i = τ_i C⁻¹A − I
        for k in 0..n {
            t.push((row0 + k, col0 + k, -1.0));
        }
        for (r, s, v) in a.triplets() {
            let scale = cinv.as_ref().map_or(1.0, |d| d[r]);
            t.push((row0 + r, col0 + s, tau * scale * v));
        }
    }
    for i in l + 1..blocks {
        for k in 0..n {
            t.push((i * n + k, (i - 1) * n + k, -1.0));
        }
    }
    SparseMatrix::from_triplets(blocks * n, blocks * n, t)
}

/// `[x_in; τb; …; τb; 0; …; 0]` with `l` copies of `τb` and `c` zero blocks,
/// together with its norm.
pub fn build_rhs(
    b: &[f64],
    x_in: &[f64],
    tau: f64,
    l: usize,
    c: usize,
) -> Result<(DenseVector, f64)> {
    let y = stack_rhs(b, x_in, l, c, |_| tau, None)?;
    let norm = y.norm();
    Ok((y, norm))
}

fn build_rhs_for_scheme(
    a: &SparseMatrix,
    b: &[f64],
    x_in: &[f64],
    scheme: &Scheme,
    l: usize,
    c: usize,
) -> Result<DenseVector> {
    let cinv = inverse_preconditioner(a, scheme.preconditioner)?;
    if b.len() != a.n_rows() {
        return Err(QrlsError::DimensionMismatch {
            op: "build_rhs (b)",
            expected: a.n_rows(),
            found: b.len(),
        });
    }
    stack_rhs(
        b,
        x_in,
        l,
        c,
        |k| scheme.tau(k).unwrap_or(f64::NAN),
        cinv.as_deref(),
    )
}

fn stack_rhs(
    b: &[f64],
    x_in: &[f64],
    l: usize,
    c: usize,
    tau: impl Fn(usize) -> f64,
    cinv: Option<&[f64]>,
) -> Result<DenseVector> {
    let n = b.len();
    if x_in.len() != n {
        return Err(QrlsError::DimensionMismatch {
            op: "build_rhs (x_in)",
            expected: n,
            found: x_in.len(),
        });
    }
    let mut y = Vec::with_capacity((l + c + 1) * n);
    y.extend_from_slice(x_in);
    for i in 1..=l {
        let t = tau(i - 1);
        y.extend(
            b.iter()
                .enumerate()
                .map(|(k, v)| t * cinv.map_or(1.0, |d| d[k]) * v),
        );
    }
    y.resize((l + c + 1) * n, 0.0);
    Ok(DenseVector::new(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularRoute {
    /// Dense SVD of the assembled block matrix.
    DenseSvd,
    /// Exact reduction to scalar bidiagonal blocks in the eigenbasis of `A`.
    SpectralReduction,
}

/// Computed norms of `M` against the bounds `‖M‖ ≤ 2`, `‖M⁻¹‖ ≤ l+c+1` and
/// `κ_M ≤ 2(l+c+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub norm_m: f64,
    pub norm_m_inv: f64,
    pub kappa_m: f64,
    pub bound_norm: f64,
    pub bound_inv: f64,
    pub bound_kappa: f64,
    pub route: SingularRoute,
}

impl BoundsReport {
    pub fn from_singular(
        sigma_min: f64,
        sigma_max: f64,
        l: usize,
        c: usize,
        route: SingularRoute,
    ) -> Self {
        let blocks = (l + c + 1) as f64;
        Self {
            norm_m: sigma_max,
            norm_m_inv: 1.0 / sigma_min,
            kappa_m: sigma_max / sigma_min,
            bound_norm: 2.0,
            bound_inv: blocks,
            bound_kappa: 2.0 * blocks,
            route,
        }
    }

    pub fn holds(&self) -> bool {
        self.check().is_ok()
    }

    pub fn check(&self) -> Result<()> {
        let checks = [
            ("‖M‖", self.norm_m, self.bound_norm),
            ("‖M⁻¹‖", self.norm_m_inv, self.bound_inv),
            ("κ_M", self.kappa_m, self.bound_kappa),
        ];
        for (quantity, computed, bound) in checks {
            if !(computed <= bound * (1.0 + BOUND_SLACK)) {
                return Err(QrlsError::BoundViolation {
                    quantity,
                    computed,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Dense SVD check of the norm and condition bounds on an assembled `M`.
pub fn verify_lemma3(m: &SparseMatrix, l: usize, c: usize) -> Result<BoundsReport> {
    verify_lemma3_with(m, l, c, &DenseOracle::default())
}

pub fn verify_lemma3_with(
    m: &SparseMatrix,
    l: usize,
    c: usize,
    oracle: &DenseOracle,
) -> Result<BoundsReport> {
    let expected = m.n_rows().is_multiple_of(l + c + 1);
    if !m.is_square() || !expected {
        return Err(QrlsError::InvalidArgument(format!(
            "a {}x{} matrix cannot hold {} square blocks",
            m.n_rows(),
            m.n_cols(),
            l + c + 1
        )));
    }
    let (lo, hi) = oracle.singular_bounds(m)?;
    let report = BoundsReport::from_singular(lo, hi, l, c, SingularRoute::DenseSvd);
    report.check()?;
    Ok(report)
}

/// Extreme singular values of `M_{l,c}` without assembling it.
///
/// Every block `R_i = I − τ_i s A` (with `s` the constant Jacobi scale, or 1)
/// is diagonal in the eigenbasis of `A`, so `M` is orthogonally equivalent
/// to a direct sum of `(l+c+1)`-square scalar bidiagonal matrices, one per
/// eigenvalue `λ_k`, with subdiagonal `1 − τ_i s λ_k` then `1`.
pub fn spectral_singular_bounds(
    a: &SparseMatrix,
    scheme: &Scheme,
    l: usize,
    c: usize,
    oracle: &DenseOracle,
) -> Result<(f64, f64)> {
    let cinv = certify(a, scheme)?;
    let scale = cinv.as_ref().map_or(1.0, |d| d[0]);
    let eig = oracle.symmetric_eigenvalues(a)?;
    let blocks = l + c + 1;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for lambda in eig {
        let mut t = Vec::with_capacity(2 * blocks);
        for i in 0..blocks {
            t.push((i, i, 1.0));
            if (1..=l).contains(&i) {
                let tau = scheme.tau(i - 1).ok_or_else(|| {
                    QrlsError::InvalidArgument(format!("scheme has no step size for block {i}"))
                })?;
                t.push((i, i - 1, -(1.0 - tau * scale * lambda)));
            } else if i > l {
                t.push((i, i - 1, -1.0));
            }
        }
        let bidiag = SparseMatrix::from_triplets(blocks, blocks, t)?;
        let (s_lo, s_hi) = oracle.singular_bounds(&bidiag)?;
        lo = lo.min(s_lo);
        hi = hi.max(s_hi);
    }
    Ok((lo, hi))
}

/// Norm and condition bounds through [`spectral_singular_bounds`].
pub fn verify_lemma3_spectral(
    a: &SparseMatrix,
    scheme: &Scheme,
    l: usize,
    c: usize,
) -> Result<BoundsReport> {
    let (lo, hi) = spectral_singular_bounds(a, scheme, l, c, &DenseOracle::default())?;
    let report = BoundsReport::from_singular(lo, hi, l, c, SingularRoute::SpectralReduction);
    report.check()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec, SpectralBounds};
    use crate::iterate::{run_iterations, Preconditioner};
    use crate::linalg::{dense_solve, spmv};

    fn case_a(n: usize) -> (SparseMatrix, DenseVector, Scheme) {
        let (a, b) = assemble(&ProblemSpec::one_d(Case::A, n).unwrap()).unwrap();
        let scheme =
            Scheme::richardson(spectral_bounds(&a, BoundsMethod::DenseExact).unwrap()).unwrap();
        (a, b, scheme)
    }

    #[test]
    fn structure_of_m22() {
        let (a, _, scheme) = case_a(6);
        let n = a.n_rows();
        let m = build_block_matrix(&a, &scheme, 2, 2).unwrap();
        assert_eq!(m.n_rows(), 5 * n);
        let tau = scheme.tau(0).unwrap();
        for bi in 0..5 {
            for bj in 0..5 {
                for r in 0..n {
                    for s in 0..n {
                        let got = m.get(bi * n + r, bj * n + s);
                        let id = if r == s { 1.0 } else { 0.0 };
                        let expected = if bi == bj {
                            id
                        } else if bi == bj + 1 && bi <= 2 {
                            -(id - tau * a.get(r, s))
                        } else if bi == bj + 1 {
                            -id
                        } else {
                            0.0
                        };
                        assert!((got - expected).abs() < 1e-15, "block ({bi},{bj})");
                    }
                }
            }
        }
        assert!(m.is_lower_triangular());
        assert!(m.d() <= a.d() + 1);
    }

    #[test]
    fn zero_iteration_matrix_decouples_blocks() {
        let a = SparseMatrix::identity(3);
        let scheme = Scheme::richardson(SpectralBounds::supplied(1.0, 1.0)).unwrap();
        let m = build_block_matrix(&a, &scheme, 1, 0).unwrap();
        assert_eq!(m, SparseMatrix::identity(6));
        let b = [1.0, 2.0, 3.0];
        let (y, _) = build_rhs(&b, &[0.0; 3], 1.0, 1, 0).unwrap();
        let x = dense_solve(&m, &y).unwrap();
        assert_eq!(block(&x, 1, 3), &b);
    }

    #[test]
    fn rhs_examples() {
        let (y, norm) = build_rhs(&[1.0, 1.0], &[0.0, 0.0], 0.5, 2, 1).unwrap();
        assert_eq!(y.values(), &[0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);
        assert!((norm - 1.0).abs() < 1e-15);
        let b = [3.0, 4.0];
        let (y, norm) = build_rhs(&b, &b, 1.0, 1, 0).unwrap();
        assert_eq!(y.values(), &[3.0, 4.0, 3.0, 4.0]);
        assert!((norm - 2f64.sqrt() * 5.0).abs() < 1e-14);
        assert!(build_rhs(&b, &[1.0], 1.0, 1, 0).is_err());
    }

    #[test]
    fn forward_substitution_reproduces_trajectory() {
        let (a, b, scheme) = case_a(8);
        let (l, c) = (5, 4);
        let x0 = vec![0.1; a.n_rows()];
        let sys = BlockSystem::new(&a, &b, &x0, &scheme, l, c).unwrap();
        let x = dense_solve(&sys.m, &sys.y).unwrap();
        let traj = run_iterations(&a, &b, &x0, &scheme, l, None).unwrap();
        let n = a.n_rows();
        for i in 0..=l + c {
            let expected = &traj.iterates[i.min(l)];
            let diff = expected.distance(block(&x, i, n));
            assert!(
                diff <= 1e-12 * expected.norm().max(1.0),
                "block {i}: {diff}"
            );
        }
    }

    #[test]
    fn inverse_has_block_product_structure() {
        let (a, _, scheme) = case_a(6);
        let (l, c, n) = (3, 2, 4);
        let m = build_block_matrix(&a, &scheme, l, c).unwrap();
        let inv = DenseOracle::default().inverse(&m).unwrap();
        let tau = scheme.tau(0).unwrap();
        let r = SparseMatrix::from_triplets(
            n,
            n,
            (0..n)
                .map(|k| (k, k, 1.0))
                .chain(a.triplets().map(|(i, j, v)| (i, j, -tau * v))),
        )
        .unwrap();
        // Block (i, j) of M⁻¹ is ∏ of the subdiagonal blocks between j and i.
        for i in 0..=l + c {
            for j in 0..=i {
                for col in 0..n {
                    let mut e = vec![0.0; n];
                    e[col] = 1.0;
                    for k in j + 1..=i {
                        if k <= l {
                            e = spmv(&r, &e).unwrap().into_inner();
                        }
                    }
                    for row in 0..n {
                        let got = inv[i * n + row][j * n + col];
                        assert!((got - e[row]).abs() < 1e-12, "block ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn lemma3_on_small_cases() {
        let (a, _, scheme) = case_a(6);
        let m = build_block_matrix(&a, &scheme, 4, 3).unwrap();
        let report = verify_lemma3(&m, 4, 3).unwrap();
        assert!(report.kappa_m <= 16.0);
        let identity = build_block_matrix(
            &SparseMatrix::identity(2),
            &Scheme::richardson(SpectralBounds::supplied(1.0, 1.0)).unwrap(),
            1,
            0,
        )
        .unwrap();
        let r = verify_lemma3(&identity, 1, 0).unwrap();
        assert!((r.norm_m - 1.0).abs() < 1e-12 && (r.kappa_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_norm_blocks_stay_within_two() {
        // R = I exactly (τ = 0 limit is excluded, so use A = 0 with τ = 1).
        let a = SparseMatrix::zeros(3, 3);
        let scheme = Scheme {
            preconditioner: Preconditioner::Identity,
            steps: StepSizes::Stationary(1.0),
            bounds: SpectralBounds::supplied(0.0, 0.0),
        };
        let m = build_block_matrix(&a, &scheme, 2, 2).unwrap();
        let report = verify_lemma3(&m, 2, 2).unwrap();
        assert!(report.norm_m <= 2.0);
    }

    #[test]
    fn spectral_route_matches_dense() {
        for (n, l) in [(5, 2), (8, 4), (10, 3)] {
            let (a, _, scheme) = case_a(n);
            let m = build_block_matrix(&a, &scheme, l, l - 1).unwrap();
            let dense = DenseOracle::default().singular_bounds(&m).unwrap();
            let fast =
                spectral_singular_bounds(&a, &scheme, l, l - 1, &DenseOracle::default()).unwrap();
            assert!((dense.0 - fast.0).abs() < 1e-12 && (dense.1 - fast.1).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_step_is_refused() {
        let (a, _, _) = case_a(6);
        let scheme = Scheme::damped(
            Preconditioner::Identity,
            1.0,
            SpectralBounds::supplied(0.38, 3.62),
        )
        .unwrap();
        let err = build_block_matrix(&a, &scheme, 2, 1).unwrap_err();
        assert!(matches!(
            err,
            QrlsError::ContractionViolation {
                quantity: "τ·λ_max",
                ..
            }
        ));
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
        let (a, b, scheme) = case_a(6);
        let sys = BlockSystem::new(&a, &b, &[0.0; 4], &scheme, 4, 3).unwrap();
        assert_eq!((sys.index_qubits(), sys.system_qubits()), (3, 2));
    }

    #[test]
    fn metadata_sidecar() {
        let a = SparseMatrix::identity(2);
        let scheme = Scheme::richardson(SpectralBounds::supplied(1.0, 1.0)).unwrap();
        let sys = BlockSystem::new(&a, &[1.0, 0.0], &[0.0, 0.0], &scheme, 2, 1).unwrap();
        assert_eq!(sys.metadata(), "l = 2\nc = 1\nN = 2\ntau = 1e0\n");
    }
}
