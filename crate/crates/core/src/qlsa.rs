//! Polynomial emulation of the quantum linear-system solve.
//!
//! The block system is solved through its Hermitian dilation `H = [[0, M], [Mᵀ, 0]] / 2`,
//! whose spectrum lies in `±[1/κ, 1]` with `κ = 2(l+c+1)`. An odd Chebyshev
//! series `P ≈ 1/x` on that set is applied to `[ȳ; 0]` by Clenshaw recurrence;
//! the second half of `P(H)[ȳ; 0]` approximates `M⁻¹ȳ`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blocksys::BlockSystem;
use crate::error::{QrlsError, Result};
use crate::linalg::{hermitian_dilation, DenseOracle, DenseVector, SparseMatrix};
use crate::measure::StateVector;

pub const DEFAULT_DEGREE_CAP: usize = 20_000;
/// Validation points per sub-interval.
pub const VALIDATION_POINTS: usize = 10_000;
/// Ratio between the requested output precision and the polynomial error.
pub const POLY_SAFETY_FACTOR: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct InverseApproximant {
    pub kappa: f64,
    pub delta_poly: f64,
    pub degree: usize,
    /// Chebyshev coefficients `c_0..=c_degree`; even entries are zero.
    pub coefficients: Vec<f64>,
    /// Largest `|P(x) − 1/x|` observed on the validation grid.
    pub certified_error: f64,
}

impl InverseApproximant {
    pub fn eval(&self, x: f64) -> f64 {
        clenshaw_odd(&self.coefficients, x)
    }

    /// Maximum of `|P(x) − 1/x|` over the validation grid on both sub-intervals.
    pub fn grid_error(&self) -> f64 {
        grid_error(&self.coefficients, self.kappa)
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# kappa {:e}", self.kappa)?;
        writeln!(w, "# delta_poly {:e}", self.delta_poly)?;
        writeln!(w, "# certified_error {:e}", self.certified_error)?;
        writeln!(w, "{}", self.degree)?;
        for c in &self.coefficients {
            writeln!(w, "{c:e}")?;
        }
        Ok(())
    }

    /// Reads the format of [`Self::write_text`]. The grid error is recomputed.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (mut kappa, mut delta_poly) = (None, None);
        let mut degree = None;
        let mut coefficients = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let err = |message: String| QrlsError::Parse {
                line: line_no,
                message,
            };
            if let Some(rest) = t.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                let (key, value) = (it.next(), it.next());
                let parse = |v: Option<&str>| {
                    v.and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| err(format!("invalid value in comment '{t}'")))
                };
                match key {
                    Some("kappa") => kappa = Some(parse(value)?),
                    Some("delta_poly") => delta_poly = Some(parse(value)?),
                    _ => {}
                }
                continue;
            }
            if degree.is_none() {
                degree = Some(
                    t.parse::<usize>()
                        .map_err(|_| err(format!("invalid degree '{t}'")))?,
                );
            } else {
                coefficients.push(
                    t.parse::<f64>()
                        .map_err(|_| err(format!("invalid coefficient '{t}'")))?,
                );
            }
        }
        let degree = degree.ok_or_else(|| QrlsError::Parse {
            line: 1,
            message: "missing degree line".into(),
        })?;
        if coefficients.len() != degree + 1 {
            return Err(QrlsError::Parse {
                line: 0,
                message: format!(
                    "expected {} coefficients, found {}",
                    degree + 1,
                    coefficients.len()
                ),
            });
        }
        if coefficients.iter().step_by(2).any(|c| *c != 0.0) {
            return Err(QrlsError::Parse {
                line: 0,
                message: "even-index coefficients must be zero".into(),
            });
        }
        let kappa = kappa.ok_or_else(|| QrlsError::Parse {
            line: 0,
            message: "missing '# kappa' line".into(),
        })?;
        let mut approx = Self {
            kappa,
            delta_poly: delta_poly.unwrap_or(f64::NAN),
            degree,
            coefficients,
            certified_error: 0.0,
        };
        approx.certified_error = approx.grid_error();
        Ok(approx)
    }
}

/// `Σ c_k T_k(x)` for a coefficient list with zero even entries. The result
/// is exactly odd in floating point: `P(−x) = −P(x)`.
pub fn clenshaw_odd(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2
}

/// Chebyshev points of the first kind mapped to `[lo, hi]`.
fn chebyshev_grid(lo: f64, hi: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |k| {
        let t = (std::f64::consts::PI * (k as f64 + 0.5) / m as f64).cos();
        0.5 * (hi + lo) + 0.5 * (hi - lo) * t
    })
}

fn grid_error(c: &[f64], kappa: f64) -> f64 {
    let lo = 1.0 / kappa;
    let mut worst = 0.0f64;
    for x in chebyshev_grid(lo, 1.0, VALIDATION_POINTS) {
        for s in [x, -x] {
            let e = (clenshaw_odd(c, s) - 1.0 / s).abs();
            if !(e <= worst) {
                worst = if e.is_nan() { f64::INFINITY } else { e };
            }
        }
    }
    worst
}

/// Interpolant of the smooth odd surrogate `(1 − exp(−x²/w²))/x` at
/// `degree + 1` Chebyshev points, keeping odd coefficients only.
///
/// With `w² = 1/(κ² ln(2κ/δ))` the surrogate is within `δ/2` of `1/x` on
/// `[1/κ, 1]`; the remaining budget is spent on interpolation error.
fn surrogate_coefficients(kappa: f64, delta: f64, degree: usize) -> Vec<f64> {
    let w2 = 1.0 / (kappa * kappa * (2.0 * kappa / delta).ln());
    let f = |x: f64| {
        if x == 0.0 {
            0.0
        } else {
            -(-x * x / w2).exp_m1() / x
        }
    };
    let n = degree + 1;
    let fx: Vec<f64> = chebyshev_grid(-1.0, 1.0, n).map(f).collect();
    // cos(π j (2k+1) / (2n)) looked up by the exact integer angle index.
    let period = 4 * n;
    let table: Vec<f64> = (0..period)
        .map(|m| (std::f64::consts::PI * m as f64 / (2 * n) as f64).cos())
        .collect();
    let mut c = vec![0.0; n];
    for (j, cj) in c.iter_mut().enumerate().skip(1).step_by(2) {
        let mut s = 0.0;
        for (k, v) in fx.iter().enumerate() {
            s += v * table[(j * (2 * k + 1)) % period];
        }
        *cj = 2.0 * s / n as f64;
    }
    c
}

fn certify_degree(kappa: f64, delta: f64, degree: usize) -> (Vec<f64>, f64) {
    let c = surrogate_coefficients(kappa, delta, degree);
    let e = grid_error(&c, kappa);
    (c, e)
}

pub fn build_inverse_poly(kappa: f64, delta_poly: f64) -> Result<InverseApproximant> {
    build_inverse_poly_capped(kappa, delta_poly, DEFAULT_DEGREE_CAP)
}

/// Smallest odd degree (found by doubling then bisection) whose interpolant
/// passes grid certification.
pub fn build_inverse_poly_capped(
    kappa: f64,
    delta_poly: f64,
    cap: usize,
) -> Result<InverseApproximant> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(QrlsError::InvalidArgument(format!(
            "kappa must be ≥ 1, got {kappa}"
        )));
    }
    if !(delta_poly > 0.0 && delta_poly < 1.0) {
        return Err(QrlsError::InvalidArgument(format!(
            "delta_poly must lie in (0, 1), got {delta_poly}"
        )));
    }
    let odd = |d: usize| d | 1;
    let cap = if cap.is_multiple_of(2) {
        cap.saturating_sub(1)
    } else {
        cap
    };
    let mut hi = odd((kappa * (1.0 / delta_poly).ln()).ceil().max(1.0) as usize).min(cap);
    let mut lo = 0usize; // largest degree known to fail
    let (mut best, mut best_err) = certify_degree(kappa, delta_poly, hi);
    while best_err > delta_poly {
        if hi >= cap {
            return Err(QrlsError::DegreeCapExceeded {
                cap,
                achieved: best_err,
                target: delta_poly,
            });
        }
        lo = hi;
        hi = odd(2 * hi).min(cap);
        (best, best_err) = certify_degree(kappa, delta_poly, hi);
    }
    while hi - lo > 2 {
        let mid = odd(lo + (hi - lo) / 2);
        let mid = if mid >= hi { hi - 2 } else { mid };
        let (c, e) = certify_degree(kappa, delta_poly, mid);
        if e <= delta_poly {
            hi = mid;
            best = c;
            best_err = e;
        } else {
            lo = mid;
        }
    }
    Ok(InverseApproximant {
        kappa,
        delta_poly,
        degree: hi,
        coefficients: best,
        certified_error: best_err,
    })
}

type PolyCache = HashMap<(u64, u64), Arc<InverseApproximant>>;

/// Memoized [`build_inverse_poly`]; the construction is deterministic, so
/// repeated solves with the same `(κ, δ)` share one approximant.
pub fn cached_inverse_poly(kappa: f64, delta_poly: f64) -> Result<Arc<InverseApproximant>> {
    static CACHE: OnceLock<Mutex<PolyCache>> = OnceLock::new();
    let key = (kappa.to_bits(), delta_poly.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let built = Arc::new(build_inverse_poly(kappa, delta_poly)?);
    cache
        .lock()
        .expect("cache lock")
        .insert(key, Arc::clone(&built));
    Ok(built)
}

/// `P(H) v` by Clenshaw recurrence with two work vectors and one product
/// with `H` per degree. `H` must be square.
pub fn apply_odd_polynomial(
    h: &SparseMatrix,
    coefficients: &[f64],
    v: &[f64],
) -> Result<DenseVector> {
    if !h.is_square() || h.n_rows() != v.len() {
        return Err(QrlsError::DimensionMismatch {
            op: "apply_odd_polynomial",
            expected: h.n_rows(),
            found: v.len(),
        });
    }
    let n = v.len();
    let (mut b1, mut b2) = (vec![0.0; n], vec![0.0; n]);
    // b2 ← c_k v + 2 H b1 − b2 touches row i only, so it can be updated in
    // place before the roles of the two buffers swap.
    let row_dot = |i: usize, x: &[f64]| {
        let (cols, vals) = h.row(i);
        cols.iter().zip(vals).map(|(&j, a)| a * x[j]).sum::<f64>()
    };
    for &ck in coefficients.iter().skip(1).rev() {
        for i in 0..n {
            b2[i] = ck * v[i] + 2.0 * row_dot(i, &b1) - b2[i];
        }
        std::mem::swap(&mut b1, &mut b2);
    }
    // P(H)v = H b1 − b2
    let out = (0..n).map(|i| row_dot(i, &b1) - b2[i]).collect();
    Ok(DenseVector::new(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlsaMethod {
    PolyEmulation,
    ExactOracle,
    ExactPlusNoise,
}

impl QlsaMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            QlsaMethod::PolyEmulation => "poly_emulation",
            QlsaMethod::ExactOracle => "exact_oracle",
            QlsaMethod::ExactPlusNoise => "exact_plus_noise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct QlsaResult {
    pub state: StateVector,
    pub delta_requested: f64,
    /// Polynomial degree (0 for the oracle channels).
    pub degree_used: usize,
    pub method: QlsaMethod,
    /// Estimate of `‖M⁻¹y‖`, the scale lost by normalization.
    pub solution_norm: f64,
}

fn normalized_rhs(sys: &BlockSystem) -> Result<(Vec<f64>, f64)> {
    let norm = sys.norm_y();
    if norm == 0.0 {
        return Err(QrlsError::ZeroRhs);
    }
    Ok((sys.y.iter().map(|v| v / norm).collect(), norm))
}

pub fn apply_qlsa(sys: &BlockSystem, delta: f64) -> Result<QlsaResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QrlsError::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let kappa = 2.0 * sys.n_blocks() as f64;
    let approx = cached_inverse_poly(kappa, delta / POLY_SAFETY_FACTOR)?;
    apply_qlsa_with(sys, &approx, delta)
}

/// Solve with a caller-supplied approximant, e.g. one read from disk.
pub fn apply_qlsa_with(
    sys: &BlockSystem,
    approx: &InverseApproximant,
    delta: f64,
) -> Result<QlsaResult> {
    let (ybar, ynorm) = normalized_rhs(sys)?;
    let h = hermitian_dilation(&sys.m)?.scaled(0.5);
    let dim = sys.dim();
    let mut rhs = ybar;
    rhs.resize(2 * dim, 0.0);
    let out = apply_odd_polynomial(&h, &approx.coefficients, &rhs)?;
    // H⁻¹[ȳ; 0] = [0; 2M⁻¹ȳ]
    let second = DenseVector::from(&out[dim..]);
    let raw_norm = second.norm();
    let state = StateVector::from_unnormalized(second.into_inner(), sys.n)?;
    Ok(QlsaResult {
        state,
        delta_requested: delta,
        degree_used: approx.degree,
        method: QlsaMethod::PolyEmulation,
        solution_norm: 0.5 * raw_norm * ynorm,
    })
}

pub fn exact_oracle(sys: &BlockSystem) -> Result<QlsaResult> {
    exact_oracle_with(sys, &DenseOracle::default())
}

pub fn exact_oracle_with(sys: &BlockSystem, oracle: &DenseOracle) -> Result<QlsaResult> {
    if sys.norm_y() == 0.0 {
        return Err(QrlsError::ZeroRhs);
    }
    let x = oracle.solve(&sys.m, &sys.y)?;
    let norm = x.norm();
    Ok(QlsaResult {
        state: StateVector::from_unnormalized(x.into_inner(), sys.n)?,
        delta_requested: 0.0,
        degree_used: 0,
        method: QlsaMethod::ExactOracle,
        solution_norm: norm,
    })
}

#[derive(Debug, Clone)]
pub enum Perturbation {
    /// Rotate towards the component of this vector orthogonal to the exact state.
    Direction(Vec<f64>),
    /// Rotate towards a seeded Gaussian direction.
    Random(u64),
}

/// Exact state rotated so that `‖result − exact‖ = δ` exactly.
pub fn exact_plus_noise(
    sys: &BlockSystem,
    delta: f64,
    perturbation: &Perturbation,
) -> Result<QlsaResult> {
    if !(0.0..2.0).contains(&delta) {
        return Err(QrlsError::InvalidArgument(format!(
            "perturbation norm must lie in [0, 2), got {delta}"
        )));
    }
    let exact = exact_oracle(sys)?;
    let x = exact.state.amplitudes();
    let raw: Vec<f64> = match perturbation {
        Perturbation::Direction(d) => {
            if d.len() != x.len() {
                return Err(QrlsError::DimensionMismatch {
                    op: "exact_plus_noise",
                    expected: x.len(),
                    found: d.len(),
                });
            }
            d.clone()
        }
        Perturbation::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..x.len())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };
    let proj = crate::linalg::dot(&raw, x);
    let mut u = DenseVector::new(
        raw.iter()
            .zip(x.iter())
            .map(|(r, xi)| r - proj * xi)
            .collect(),
    );
    // One re-orthogonalization pass keeps u ⟂ x to rounding level.
    let proj = u.dot(x);
    u.axpy(-proj, x);
    let u = u.normalized().ok_or_else(|| {
        QrlsError::InvalidArgument("perturbation direction is parallel to the exact state".into())
    })?;
    let theta = 2.0 * (0.5 * delta).asin();
    let (s, c) = theta.sin_cos();
    let rotated: Vec<f64> = x
        .iter()
        .zip(u.iter())
        .map(|(xi, ui)| c * xi + s * ui)
        .collect();
    Ok(QlsaResult {
        state: StateVector::from_unnormalized(rotated, sys.n)?,
        delta_requested: delta,
        degree_used: 0,
        method: QlsaMethod::ExactPlusNoise,
        solution_norm: exact.solution_norm,
    })
}

/// Unit vector orthogonal to the exact block `j`, supported on block `j`.
/// Rotating the exact state towards it moves the collapsed state of outcome
/// `j` as far as an error of norm `δ` allows.
pub fn collapse_adversary(exact: &StateVector, j: usize) -> Result<Vec<f64>> {
    let n = exact.block_size();
    if n < 2 {
        return Err(QrlsError::InvalidArgument(
            "an in-block perturbation needs blocks of size ≥ 2".into(),
        ));
    }
    if j >= exact.n_blocks() {
        return Err(QrlsError::InvalidArgument(format!(
            "block {j} out of range"
        )));
    }
    let target = DenseVector::from(exact.block(j))
        .normalized()
        .ok_or_else(|| QrlsError::InvalidArgument(format!("block {j} is zero")))?;
    // Coordinate axis least aligned with the block, then Gram-Schmidt.
    let k = (0..n)
        .min_by(|&a, &b| target[a].abs().total_cmp(&target[b].abs()))
        .expect("n ≥ 2");
    let mut w = DenseVector::zeros(n);
    w[k] = 1.0;
    let p = w.dot(&target);
    w.axpy(-p, &target);
    let w = w
        .normalized()
        .expect("least-aligned axis is not parallel to a unit vector in ≥ 2 dimensions");
    let mut dir = vec![0.0; exact.amplitudes().len()];
    dir[j * n..(j + 1) * n].copy_from_slice(&w);
    Ok(dir)
}

/// Unit vector orthogonal to the exact state that moves amplitude from the
/// blocks in `success` to the others, so a rotation by `δ` lowers the
/// success probability as much as possible.
pub fn probability_adversary(
    exact: &StateVector,
    success: std::ops::RangeInclusive<usize>,
) -> Result<Vec<f64>> {
    let n = exact.block_size();
    let x = exact.amplitudes();
    let in_success = |idx: usize| success.contains(&(idx / n));
    let good: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| in_success(*i))
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    let bad: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_success(*i))
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    if good == 0.0 {
        return Err(QrlsError::InvalidArgument(
            "exact state has no success amplitude".into(),
        ));
    }
    let mut dir = vec![0.0; x.len()];
    if bad == 0.0 {
        // Every failure block is empty; any direction into them is orthogonal.
        let idx = (0..x.len()).find(|i| !in_success(*i)).ok_or_else(|| {
            QrlsError::InvalidArgument("every block is in the success set".into())
        })?;
        dir[idx] = 1.0;
        return Ok(dir);
    }
    // (‖g‖/‖b‖)·b − (‖b‖/‖g‖)·g is a unit vector orthogonal to g + b.
    for (i, d) in dir.iter_mut().enumerate() {
        *d = if in_success(i) {
            -(bad / good) * x[i]
        } else {
            (good / bad) * x[i]
        };
    }
    Ok(dir)
}
