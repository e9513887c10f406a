//! First-order relaxation `x ← x + τ_k C⁻¹ (b − A x)`.
//!
//! This is both the classical baseline and the definition of the iteration
//! blocks `R_k = I − τ_k C⁻¹ A` embedded in the block system.

use crate::error::{QrlsError, Result};
use crate::fem::SpectralBounds;
use crate::linalg::{norm2, DenseVector, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// `C = I` (Richardson).
    Identity,
    /// `C = diag(A)`.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepSizes {
    Stationary(f64),
    /// One step size per iteration, applied in the given order.
    Chebyshev(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub preconditioner: Preconditioner,
    pub steps: StepSizes,
    /// Bounds on the spectrum of `C⁻¹A`.
    pub bounds: SpectralBounds,
}

impl Scheme {
    /// Richardson with the optimal stationary step `2 / (a + b)`.
    pub fn richardson(bounds: SpectralBounds) -> Result<Self> {
        Ok(Self {
            preconditioner: Preconditioner::Identity,
            steps: StepSizes::Stationary(optimal_tau(&bounds)?),
            bounds,
        })
    }

    /// Stationary scheme with damping factor `omega` as the step size.
    pub fn damped(
        preconditioner: Preconditioner,
        omega: f64,
        bounds: SpectralBounds,
    ) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(QrlsError::InvalidArgument(format!(
                "damping must be positive, got {omega}"
            )));
        }
        Ok(Self {
            preconditioner,
            steps: StepSizes::Stationary(omega),
            bounds,
        })
    }

    pub fn chebyshev(
        preconditioner: Preconditioner,
        bounds: SpectralBounds,
        l: usize,
    ) -> Result<Self> {
        Ok(Self {
            preconditioner,
            steps: StepSizes::Chebyshev(chebyshev_taus(&bounds, l)?),
            bounds,
        })
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.steps, StepSizes::Stationary(_))
    }

    /// Step size used to produce iterate `k + 1` from iterate `k`.
    pub fn tau(&self, k: usize) -> Option<f64> {
        match &self.steps {
            StepSizes::Stationary(t) => Some(*t),
            StepSizes::Chebyshev(ts) => ts.get(k).copied(),
        }
    }

    fn taus(&self) -> &[f64] {
        match &self.steps {
            StepSizes::Stationary(t) => std::slice::from_ref(t),
            StepSizes::Chebyshev(ts) => ts,
        }
    }

    /// Upper bound on `max_k ‖I − τ_k C⁻¹A‖` from the spectral bounds. Exact
    /// for symmetric `C⁻¹A` (identity preconditioner, symmetric `A`).
    pub fn contraction_bound(&self) -> f64 {
        let (a, b) = (self.bounds.a, self.bounds.b);
        self.taus()
            .iter()
            .map(|t| (1.0 - t * a).abs().max((1.0 - t * b).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `τ_k · b`; `‖R_k‖ ≤ 1` needs this to stay at or below 2.
    pub fn max_tau_lambda(&self) -> f64 {
        self.taus()
            .iter()
            .map(|t| t * self.bounds.b)
            .fold(0.0, f64::max)
    }
}

/// Iterates `x^(0) … x^(l)` and, when an exact solution was supplied, the
/// error norms `‖x^(i) − x̃‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<DenseVector>,
    pub errors: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &DenseVector {
        self.iterates.last().expect("trajectory holds x^(0)")
    }

    /// `‖e_i‖ / ‖e_0‖`.
    pub fn relative_errors(&self) -> Option<Vec<f64>> {
        self.errors.as_ref().map(|e| relative(e))
    }
}

fn relative(errors: &[f64]) -> Vec<f64> {
    let e0 = errors[0];
    errors
        .iter()
        .map(|e| if e0 > 0.0 { e / e0 } else { *e })
        .collect()
}

pub fn optimal_tau(bounds: &SpectralBounds) -> Result<f64> {
    positive_lower(bounds)?;
    Ok(2.0 / (bounds.a + bounds.b))
}

/// `(1 − a/b) / (1 + a/b)`.
pub fn convergence_factor(bounds: &SpectralBounds) -> Result<f64> {
    positive_lower(bounds)?;
    // Same quantity as (1 − a/b)/(1 + a/b), one rounding fewer.
    Ok((bounds.b - bounds.a) / (bounds.b + bounds.a))
}

/// `⌈(b/a) ln(1/ε) / 2⌉`.
pub fn required_iterations(bounds: &SpectralBounds, eps: f64) -> Result<usize> {
    positive_lower(bounds)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QrlsError::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    let l = 0.5 * (bounds.b / bounds.a) * (1.0 / eps).ln();
    // Guard against 0.9999999 rounding up an exact integer like 1.
    Ok((l - 1e-12 * l.max(1.0)).ceil().max(0.0) as usize)
}

/// Reciprocals of the Chebyshev nodes of degree `l` mapped onto `[a, b]`.
pub fn chebyshev_taus(bounds: &SpectralBounds, l: usize) -> Result<Vec<f64>> {
    positive_lower(bounds)?;
    if l == 0 {
        return Err(QrlsError::InvalidArgument(
            "Chebyshev scheme needs l ≥ 1".into(),
        ));
    }
    let (a, b) = (bounds.a, bounds.b);
    Ok((1..=l)
        .map(|i| {
            let theta = (2 * i - 1) as f64 * std::f64::consts::PI / (2 * l) as f64;
            1.0 / ((a + b) / 2.0 + (b - a) / 2.0 * theta.cos())
        })
        .collect())
}

fn positive_lower(bounds: &SpectralBounds) -> Result<()> {
    if !(bounds.a > 0.0) || bounds.b < bounds.a {
        return Err(QrlsError::InvalidArgument(format!(
            "need 0 < a ≤ b, got a = {}, b = {}",
            bounds.a, bounds.b
        )));
    }
    Ok(())
}

/// `C⁻¹` as a diagonal, or `None` for the identity.
pub(crate) fn inverse_preconditioner(
    a: &SparseMatrix,
    p: Preconditioner,
) -> Result<Option<Vec<f64>>> {
    match p {
        Preconditioner::Identity => Ok(None),
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(row, d)| {
                if d == 0.0 {
                    Err(QrlsError::ZeroDiagonal { row })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

/// Runs `l` steps and hands every iterate (including `x^(0)`) to `visit`.
pub fn for_each_iterate(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    scheme: &Scheme,
    l: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let n = a.n_rows();
    if !a.is_square() {
        return Err(QrlsError::NotSquare {
            op: "run_iterations",
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    for (len, what) in [
        (b.len(), "run_iterations (b)"),
        (x0.len(), "run_iterations (x0)"),
    ] {
        if len != n {
            return Err(QrlsError::DimensionMismatch {
                op: what,
                expected: n,
                found: len,
            });
        }
    }
    if let StepSizes::Chebyshev(ts) = &scheme.steps {
        if ts.len() < l {
            return Err(QrlsError::InvalidArgument(format!(
                "Chebyshev scheme has {} step sizes but {l} iterations were requested",
                ts.len()
            )));
        }
    }
    let cinv = inverse_preconditioner(a, scheme.preconditioner)?;
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    visit(0, &x);
    for k in 0..l {
        let tau = scheme.tau(k).expect("checked above");
        a.mul_vec_into(&x, &mut ax);
        for i in 0..n {
            let residual = b[i] - ax[i];
            let scale = cinv.as_ref().map_or(1.0, |c| c[i]);
            x[i] += tau * scale * residual;
        }
        visit(k + 1, &x);
    }
    Ok(())
}

pub fn run_iterations(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    scheme: &Scheme,
    l: usize,
    x_exact: Option<&[f64]>,
) -> Result<Trajectory> {
    if let Some(xe) = x_exact {
        if xe.len() != a.n_rows() {
            return Err(QrlsError::DimensionMismatch {
                op: "run_iterations (x_exact)",
                expected: a.n_rows(),
                found: xe.len(),
            });
        }
    }
    let mut iterates = Vec::with_capacity(l + 1);
    let mut errors = x_exact.map(|_| Vec::with_capacity(l + 1));
    for_each_iterate(a, b, x0, scheme, l, |_, x| {
        if let (Some(errs), Some(xe)) = (errors.as_mut(), x_exact) {
            errs.push(distance(x, xe));
        }
        iterates.push(DenseVector::from(x));
    })?;
    Ok(Trajectory { iterates, errors })
}

/// Relative errors `‖e_i‖/‖e_0‖` for `i = 0..=l` without storing iterates.
pub fn relative_error_history(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    scheme: &Scheme,
    l: usize,
    x_exact: &[f64],
) -> Result<Vec<f64>> {
    let mut errors = Vec::with_capacity(l + 1);
    for_each_iterate(a, b, x0, scheme, l, |_, x| {
        errors.push(distance(x, x_exact))
    })?;
    Ok(relative(&errors))
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    norm2(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
    use crate::linalg::{dense_norm, dense_solve};

    fn bounds(a: f64, b: f64) -> SpectralBounds {
        SpectralBounds::supplied(a, b)
    }

    #[test]
    fn optimal_tau_examples() {
        assert_eq!(optimal_tau(&bounds(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(optimal_tau(&bounds(1.0, 3.0)).unwrap(), 0.5);
        let a = SparseMatrix::tridiagonal(4, -1.0, 2.0);
        let exact = spectral_bounds(&a, BoundsMethod::Analytic).unwrap();
        assert!((optimal_tau(&exact).unwrap() - 0.5).abs() < 1e-15);
        assert!(optimal_tau(&bounds(0.0, 2.0)).is_err());
    }

    #[test]
    fn convergence_factor_examples() {
        assert_eq!(convergence_factor(&bounds(1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(convergence_factor(&bounds(1.0, 3.0)).unwrap(), 0.5);
    }

    #[test]
    fn convergence_factor_is_iteration_matrix_norm() {
        let spec = ProblemSpec::one_d(Case::A, 6).unwrap();
        let (a, _) = assemble(&spec).unwrap();
        let sb = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let tau = optimal_tau(&sb).unwrap();
        let r = SparseMatrix::identity(a.n_rows())
            .triplets()
            .chain(a.triplets().map(|(i, j, v)| (i, j, -tau * v)))
            .collect::<Vec<_>>();
        let r = SparseMatrix::from_triplets(a.n_rows(), a.n_rows(), r).unwrap();
        let norm = dense_norm(&r).unwrap();
        assert!((norm - convergence_factor(&sb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn required_iterations_examples() {
        let e2 = (-2.0f64).exp();
        assert_eq!(required_iterations(&bounds(3.0, 3.0), e2).unwrap(), 1);
        assert_eq!(required_iterations(&bounds(1.0, 10.0), 1e-8).unwrap(), 93);
        assert!(required_iterations(&bounds(1.0, 10.0), 1.5).is_err());
    }

    #[test]
    fn classical_run_reaches_eps_within_prediction() {
        let spec = ProblemSpec::one_d(Case::A, 8).unwrap();
        let (a, b) = assemble(&spec).unwrap();
        let exact = dense_solve(&a, &b).unwrap();
        let sb = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let scheme = Scheme::richardson(sb).unwrap();
        let eps = 1e-6;
        let l = required_iterations(&sb, eps).unwrap();
        let rel =
            relative_error_history(&a, &b, &vec![0.0; a.n_rows()], &scheme, l, &exact).unwrap();
        assert!(*rel.last().unwrap() <= eps);
    }

    #[test]
    fn chebyshev_single_node_is_midpoint() {
        let t = chebyshev_taus(&bounds(1.0, 3.0), 1).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_two_nodes_are_mapped_roots() {
        let t = chebyshev_taus(&bounds(1.0, 3.0), 2).unwrap();
        let half_root2 = std::f64::consts::SQRT_2 / 2.0;
        assert!((1.0 / t[0] - (2.0 + half_root2)).abs() < 1e-14);
        assert!((1.0 / t[1] - (2.0 - half_root2)).abs() < 1e-14);
        // Degree-2 Chebyshev polynomial T2(s) = 2s² − 1 vanishes at the
        // nodes mapped back to [-1, 1].
        for tau in t {
            let s = (1.0 / tau - 2.0) / 1.0;
            assert!((2.0 * s * s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn chebyshev_beats_stationary_on_diagonal_spectrum() {
        let (lo, hi, l) = (1.0, 20.0, 6);
        let spectrum: Vec<f64> = (0..40).map(|k| lo + (hi - lo) * k as f64 / 39.0).collect();
        let a = SparseMatrix::diagonal_matrix(&spectrum);
        let sb = bounds(lo, hi);
        let n = spectrum.len();
        let b = vec![0.0; n];
        let x0 = vec![1.0; n];
        let zero = vec![0.0; n];
        let worst = |scheme: &Scheme| {
            let traj = run_iterations(&a, &b, &x0, scheme, l, Some(&zero)).unwrap();
            // Worst mode amplification |∏(1 − τ λ)| over sampled eigenvalues.
            traj.last().iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let cheb = Scheme::chebyshev(Preconditioner::Identity, sb, l).unwrap();
        let stat = Scheme::richardson(sb).unwrap();
        assert!(worst(&cheb) <= worst(&stat));
    }

    #[test]
    fn identity_system_converges_in_one_step() {
        let a = SparseMatrix::identity(3);
        let scheme = Scheme::damped(Preconditioner::Identity, 1.0, bounds(1.0, 1.0)).unwrap();
        let traj =
            run_iterations(&a, &[1.0, 2.0, 3.0], &[9.0, -4.0, 0.5], &scheme, 1, None).unwrap();
        assert_eq!(traj.iterates[1].values(), &[1.0, 2.0, 3.0]);
        assert!(traj.errors.is_none());
    }

    #[test]
    fn error_ratio_bounded_by_factor() {
        let spec = ProblemSpec::one_d(Case::A, 6).unwrap();
        let (a, b) = assemble(&spec).unwrap();
        let exact = dense_solve(&a, &b).unwrap();
        let sb = spectral_bounds(&a, BoundsMethod::DenseExact).unwrap();
        let rho = convergence_factor(&sb).unwrap();
        let scheme = Scheme::richardson(sb).unwrap();
        let traj = run_iterations(&a, &b, &[0.0; 4], &scheme, 20, Some(&exact)).unwrap();
        let e = traj.errors.unwrap();
        for w in e.windows(2) {
            assert!(w[1] <= rho * w[0] + 1e-10);
        }
    }

    #[test]
    fn jacobi_rejects_zero_diagonal() {
        let a = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let scheme = Scheme::damped(Preconditioner::Jacobi, 0.5, bounds(1.0, 2.0)).unwrap();
        let err = run_iterations(&a, &[1.0, 1.0], &[0.0, 0.0], &scheme, 2, None).unwrap_err();
        assert!(matches!(err, QrlsError::ZeroDiagonal { row: 0 }));
    }

    #[test]
    fn chebyshev_run_needs_enough_steps() {
        let scheme = Scheme::chebyshev(Preconditioner::Identity, bounds(1.0, 2.0), 2).unwrap();
        let a = SparseMatrix::identity(2);
        assert!(run_iterations(&a, &[1.0, 1.0], &[0.0, 0.0], &scheme, 3, None).is_err());
    }
}
