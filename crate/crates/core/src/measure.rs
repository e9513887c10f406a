//! Index-register measurement: exact block probabilities, seeded sampling,
//! collapse, and the repeat-until-success driver.
//!
//! Sampling uses ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`; a
//! uniform draw is `(next_u64 >> 11) · 2⁻⁵³`, and the outcome is the first
//! index whose cumulative probability exceeds it.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocksys::{block, BlockSystem};
use crate::error::{QrlsError, Result};
use crate::iterate::{run_iterations, Scheme};
use crate::linalg::{dense_solve, DenseVector, SparseMatrix};
use crate::qlsa::{apply_qlsa, exact_oracle, QlsaResult};
use crate::theory;

pub const DEFAULT_ATTEMPT_CAP: usize = 64;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Unit-norm amplitudes over `n_blocks` blocks of `block_size` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DenseVector,
    block_size: usize,
}

impl StateVector {
    pub fn new(amplitudes: Vec<f64>, block_size: usize) -> Result<Self> {
        check_blocking(amplitudes.len(), block_size)?;
        let norm = crate::linalg::norm2(&amplitudes);
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QrlsError::NotNormalized { norm });
        }
        Ok(Self {
            amplitudes: DenseVector::new(amplitudes),
            block_size,
        })
    }

    pub fn from_unnormalized(amplitudes: Vec<f64>, block_size: usize) -> Result<Self> {
        check_blocking(amplitudes.len(), block_size)?;
        let v = DenseVector::new(amplitudes)
            .normalized()
            .ok_or(QrlsError::NotNormalized { norm: 0.0 })?;
        Ok(Self {
            amplitudes: v,
            block_size,
        })
    }

    pub fn amplitudes(&self) -> &DenseVector {
        &self.amplitudes
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn n_blocks(&self) -> usize {
        self.amplitudes.len() / self.block_size
    }

    pub fn block(&self, i: usize) -> &[f64] {
        block(&self.amplitudes, i, self.block_size)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amplitudes.distance(&other.amplitudes)
    }
}

fn check_blocking(len: usize, block_size: usize) -> Result<()> {
    if block_size == 0 || !len.is_multiple_of(block_size) || len == 0 {
        return Err(QrlsError::DimensionMismatch {
            op: "StateVector",
            expected: block_size.max(1) * (len / block_size.max(1)).max(1),
            found: len,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDistribution {
    pub probabilities: Vec<f64>,
    pub l: usize,
    pub c: usize,
    pub p_success: f64,
}

impl MeasurementDistribution {
    pub fn success_range(&self) -> std::ops::RangeInclusive<usize> {
        self.l..=self.l + self.c
    }

    pub fn is_success(&self, index: usize) -> bool {
        self.success_range().contains(&index)
    }
}

/// `p_i = ‖block i‖²` and the total mass on blocks `l..=l+c`.
pub fn register_probabilities(
    x: &StateVector,
    l: usize,
    c: usize,
) -> Result<MeasurementDistribution> {
    if x.n_blocks() != l + c + 1 {
        return Err(QrlsError::DimensionMismatch {
            op: "register_probabilities (blocks)",
            expected: l + c + 1,
            found: x.n_blocks(),
        });
    }
    let norm = x.amplitudes().norm();
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(QrlsError::NotNormalized { norm });
    }
    let probabilities: Vec<f64> = (0..x.n_blocks())
        .map(|i| x.block(i).iter().map(|v| v * v).sum())
        .collect();
    let p_success = probabilities[l..=l + c].iter().sum();
    Ok(MeasurementDistribution {
        probabilities,
        l,
        c,
        p_success,
    })
}

/// Seeded outcome generator; successive draws continue one stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn draw(&mut self, dist: &MeasurementDistribution) -> usize {
        let u = self.uniform() * dist.probabilities.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, p) in dist.probabilities.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// Block `j` renormalized to unit length.
pub fn collapse(x: &StateVector, j: usize) -> Result<DenseVector> {
    DenseVector::from(x.block(j))
        .normalized()
        .ok_or_else(|| QrlsError::InvalidArgument(format!("block {j} has zero amplitude")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Discard,
    RestartWithIterate,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Discard => "discard",
            Policy::RestartWithIterate => "restart",
        })
    }
}

impl FromStr for Policy {
    type Err = QrlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discard" => Ok(Policy::Discard),
            "restart" | "restart_with_iterate" => Ok(Policy::RestartWithIterate),
            other => Err(QrlsError::InvalidArgument(format!(
                "unknown policy '{other}' (expected discard or restart)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Polynomial,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub outcome_index: usize,
    pub success: bool,
    pub p_success: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrlsRunResult {
    pub outcome_index: usize,
    pub success: bool,
    pub collapsed: DenseVector,
    pub attempts: usize,
    /// `‖collapsed − x̄_l‖` against the normalized classical iterate, when known.
    pub discrepancy_vs_classical: Option<f64>,
    pub seed: u64,
    pub delta_used: f64,
    pub degree_used: usize,
    pub p_success: f64,
    pub log: Vec<AttemptRecord>,
}

impl QrlsRunResult {
    pub const CSV_HEADER: &'static str =
        "outcome_index,success,attempts,discrepancy_vs_classical,seed,delta_used,degree_used,p_success";
    pub const LOG_HEADER: &'static str = "attempt,outcome_index,success,p_success,delta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{},{:e}",
            self.outcome_index,
            self.success as u8,
            self.attempts,
            self.discrepancy_vs_classical
                .map_or_else(|| "nan".to_string(), |d| format!("{d:e}")),
            self.seed,
            self.delta_used,
            self.degree_used,
            self.p_success,
        )
    }

    pub fn log_rows(&self) -> Vec<String> {
        self.log
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{:e},{:e}",
                    r.attempt, r.outcome_index, r.success as u8, r.p_success, r.delta
                )
            })
            .collect()
    }
}

/// One draw from `dist` with a fresh generator seeded by `seed`.
pub fn sample_and_collapse(
    x: &StateVector,
    dist: &MeasurementDistribution,
    seed: u64,
) -> Result<QrlsRunResult> {
    let j = Sampler::new(seed).draw(dist);
    let success = dist.is_success(j);
    Ok(QrlsRunResult {
        outcome_index: j,
        success,
        collapsed: collapse(x, j)?,
        attempts: 1,
        discrepancy_vs_classical: None,
        seed,
        delta_used: f64::NAN,
        degree_used: 0,
        p_success: dist.p_success,
        log: vec![AttemptRecord {
            attempt: 1,
            outcome_index: j,
            success,
            p_success: dist.p_success,
            delta: f64::NAN,
        }],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub l: usize,
    pub c: usize,
    pub eps: f64,
    pub policy: Policy,
    pub seed: u64,
    /// Bypasses the theory-driven choice of `δ`.
    pub delta_override: Option<f64>,
    pub attempt_cap: usize,
    pub solver: Solver,
}

impl RunConfig {
    /// `c = l − 1`, discard policy, polynomial solver, attempt cap 64.
    pub fn new(l: usize, eps: f64, seed: u64) -> Self {
        Self {
            l,
            c: l.saturating_sub(1),
            eps,
            policy: Policy::Discard,
            seed,
            delta_override: None,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            solver: Solver::Polynomial,
        }
    }
}

/// QLSA precision for a target collapse precision `eps`.
///
/// A zero guess gets `ε/(2√(2l))`. A nonzero guess with `ε₁ = ‖A⁻¹b − x_in‖ < ‖A⁻¹b‖`
/// gets the extra factor `(1 − r)/(1 + r)`. Otherwise (singular `A`, or a
/// guess farther than `‖x̃‖`) the zero-guess value is used.
pub fn select_delta(a: &SparseMatrix, b: &[f64], x_in: &[f64], eps: f64, l: usize) -> Result<f64> {
    let base = theory::delta_for_epsilon(eps, l)?;
    if x_in.iter().all(|v| *v == 0.0) {
        return Ok(base);
    }
    let Ok(x_tilde) = dense_solve(a, b) else {
        return Ok(base);
    };
    let eps1 = x_tilde.distance(x_in);
    match theory::guess_factor(eps1, x_tilde.norm()) {
        Ok(f) if f > 0.0 => Ok(base * f),
        _ => Ok(base),
    }
}

pub fn run_qrls(
    a: &SparseMatrix,
    b: &[f64],
    x_in: &[f64],
    scheme: &Scheme,
    cfg: &RunConfig,
) -> Result<QrlsRunResult> {
    let (l, c) = (cfg.l, cfg.c);
    if x_in.iter().all(|v| *v == 0.0) && cfg.eps > 0.5 {
        return Err(QrlsError::Hypothesis(format!(
            "a zero initial guess needs ε ≤ 1/2, got {}",
            cfg.eps
        )));
    }
    let mut sampler = Sampler::new(cfg.seed);
    let mut start = x_in.to_vec();
    let mut log = Vec::new();
    for attempt in 1..=cfg.attempt_cap {
        let delta = match cfg.delta_override {
            Some(d) => d,
            None => select_delta(a, b, &start, cfg.eps, l)?,
        };
        let sys = BlockSystem::new(a, b, &start, scheme, l, c)?;
        let solved: QlsaResult = match cfg.solver {
            Solver::Polynomial => apply_qlsa(&sys, delta)?,
            Solver::Exact => exact_oracle(&sys)?,
        };
        let dist = register_probabilities(&solved.state, l, c)?;
        let j = sampler.draw(&dist);
        let success = dist.is_success(j);
        log.push(AttemptRecord {
            attempt,
            outcome_index: j,
            success,
            p_success: dist.p_success,
            delta,
        });
        let collapsed = collapse(&solved.state, j)?;
        if success {
            let traj = run_iterations(a, b, &start, scheme, l, None)?;
            let discrepancy = traj.last().normalized().map(|x| x.distance(&collapsed));
            return Ok(QrlsRunResult {
                outcome_index: j,
                success,
                collapsed,
                attempts: attempt,
                discrepancy_vs_classical: discrepancy,
                seed: cfg.seed,
                delta_used: delta,
                degree_used: solved.degree_used,
                p_success: dist.p_success,
                log,
            });
        }
        if cfg.policy == Policy::RestartWithIterate {
            // Undo the normalization: ‖block j‖ = ‖M⁻¹y‖·√p_j.
            let scale = solved.solution_norm * dist.probabilities[j].sqrt();
            start = collapsed.scaled(scale).into_inner();
        }
    }
    Err(QrlsError::AttemptCapExceeded {
        cap: cfg.attempt_cap,
        outcomes: log.iter().map(|r| r.outcome_index).collect(),
    })
}
