//! Closed-form success-probability and precision bounds.
//!
//! Notation: `l` relaxation steps, `c` copies, `ε` target precision of the
//! collapsed state, `ε₁ = ‖x̃ − x_in‖` the initial-guess error with
//! `x̃ = A⁻¹b`, `α` the amplitude of the measured block and `δ` the QLSA
//! output precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{QrlsError, Result};

fn hypothesis(msg: String) -> QrlsError {
    QrlsError::Hypothesis(msg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub l: usize,
    pub c: usize,
    pub eps: f64,
    pub eps1: f64,
    pub norm_x_tilde: f64,
    pub alpha: f64,
    pub delta: f64,
}

/// `(c+1)/(l+c+1)`: success probability with a zero initial guess.
pub fn success_lower_bound(l: usize, c: usize) -> Result<f64> {
    if l == 0 {
        return Err(hypothesis("success bound needs l ≥ 1".into()));
    }
    Ok((c + 1) as f64 / (l + c + 1) as f64)
}

fn guess_ratio(eps1: f64, norm_x_tilde: f64) -> Result<f64> {
    if !(norm_x_tilde > 0.0) || !(eps1 >= 0.0) {
        return Err(hypothesis(format!(
            "need ε₁ ≥ 0 and ‖x̃‖ > 0, got ε₁ = {eps1}, ‖x̃‖ = {norm_x_tilde}"
        )));
    }
    if eps1 > norm_x_tilde {
        return Err(hypothesis(format!(
            "initial-guess error ε₁ = {eps1} exceeds ‖x̃‖ = {norm_x_tilde}"
        )));
    }
    Ok(eps1 / norm_x_tilde)
}

/// `(1 − r)/(1 + r)` with `r = ε₁/‖x̃‖`.
pub fn guess_factor(eps1: f64, norm_x_tilde: f64) -> Result<f64> {
    let r = guess_ratio(eps1, norm_x_tilde)?;
    Ok((1.0 - r) / (1.0 + r))
}

/// `½((1 − r)/(1 + r))²`: success probability with `c = l − 1` and an
/// initial guess at distance `ε₁` from `x̃`.
pub fn success_lower_bound_with_guess(eps1: f64, norm_x_tilde: f64) -> Result<f64> {
    Ok(0.5 * guess_factor(eps1, norm_x_tilde)?.powi(2))
}

fn check_eps(name: &str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(hypothesis(format!("{name} must lie in (0, 1), got {eps}")))
    }
}

/// `ε/(2√(2l))`.
pub fn delta_for_epsilon(eps: f64, l: usize) -> Result<f64> {
    check_eps("ε", eps)?;
    if l == 0 {
        return Err(hypothesis("δ selection needs l ≥ 1".into()));
    }
    Ok(eps / (2.0 * (2.0 * l as f64).sqrt()))
}

/// `(ε₂/(2√(2l)))·(1 − r)/(1 + r)` with `r = ε₁/‖x̃‖`; requires `ε₂ < ε₁ ≤ ‖x̃‖`.
pub fn delta_for_epsilon_with_guess(
    eps1: f64,
    eps2: f64,
    l: usize,
    norm_x_tilde: f64,
) -> Result<f64> {
    if !(eps2 < eps1) {
        return Err(hypothesis(format!(
            "need ε₂ < ε₁, got ε₂ = {eps2}, ε₁ = {eps1}"
        )));
    }
    Ok(delta_for_epsilon(eps2, l)? * guess_factor(eps1, norm_x_tilde)?)
}

fn check_alpha_delta(alpha: f64, delta: f64) -> Result<()> {
    if !(alpha <= 1.0 && delta >= 0.0 && delta < alpha) {
        return Err(hypothesis(format!(
            "need 0 ≤ δ < α ≤ 1, got α = {alpha}, δ = {delta}"
        )));
    }
    Ok(())
}

/// `2δ/(α − δ)`: distance between the collapsed exact and perturbed blocks.
pub fn post_measurement_error_bound(alpha: f64, delta: f64) -> Result<f64> {
    check_alpha_delta(alpha, delta)?;
    Ok(2.0 * delta / (alpha - delta))
}

/// `α − δ`: lower bound on the perturbed block amplitude.
pub fn amplitude_after_error(alpha: f64, delta: f64) -> Result<f64> {
    check_alpha_delta(alpha, delta)?;
    Ok(alpha - delta)
}

/// `(1 − ε)/2`.
pub fn p_prime_bound(eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(hypothesis(format!("ε must lie in [0, 1), got {eps}")));
    }
    Ok(0.5 * (1.0 - eps))
}

/// `((1 − ε₂)/2)·((1 − r)/(1 + r))²`.
pub fn p_prime_bound_with_guess(eps1: f64, eps2: f64, norm_x_tilde: f64) -> Result<f64> {
    Ok(p_prime_bound(eps2)? * guess_factor(eps1, norm_x_tilde)?.powi(2))
}

/// `1/√(2l)`: worst-case per-index amplitude in the success set for `c = l − 1`.
pub fn worst_case_alpha(l: usize) -> Result<f64> {
    if l == 0 {
        return Err(hypothesis("amplitude bound needs l ≥ 1".into()));
    }
    Ok(1.0 / (2.0 * l as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseTrial {
    pub alpha: f64,
    pub beta: f64,
    pub collapse_error: f64,
}

/// Random unit state `ψ` split into two blocks of size `n`, and `φ` at
/// distance exactly `δ` from it. Returns the first-block amplitudes of both
/// and the distance between the normalized first blocks.
pub fn collapse_trial<R: rand::Rng>(rng: &mut R, n: usize, delta: f64) -> CollapseTrial {
    let mut gauss =
        |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(rng)).collect() };
    let psi = unit(gauss(2 * n));
    let mut u = gauss(2 * n);
    let p: f64 = u.iter().zip(&psi).map(|(a, b)| a * b).sum();
    u.iter_mut().zip(&psi).for_each(|(a, b)| *a -= p * b);
    let u = unit(u);
    let theta = 2.0 * (0.5 * delta).asin();
    let (s, c) = theta.sin_cos();
    let phi: Vec<f64> = psi.iter().zip(&u).map(|(x, y)| c * x + s * y).collect();
    let alpha = crate::linalg::norm2(&psi[..n]);
    let beta = crate::linalg::norm2(&phi[..n]);
    let collapse_error = psi[..n]
        .iter()
        .zip(&phi[..n])
        .map(|(x, y)| (x / alpha - y / beta).powi(2))
        .sum::<f64>()
        .sqrt();
    CollapseTrial {
        alpha,
        beta,
        collapse_error,
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::linalg::norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonteCarloSummary {
    /// Trials satisfying the hypothesis `δ < α`.
    pub admissible: usize,
    pub error_bound_violations: usize,
    pub amplitude_bound_violations: usize,
    /// Largest `error / (2δ/(α − δ))` seen.
    pub worst_error_ratio: f64,
}

/// Checks the collapse-error and amplitude bounds on seeded random state pairs.
pub fn monte_carlo_collapse(seed: u64, trials: usize, n: usize, delta: f64) -> MonteCarloSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = MonteCarloSummary::default();
    for _ in 0..trials {
        let t = collapse_trial(&mut rng, n, delta);
        let (Ok(bound), Ok(amp)) = (
            post_measurement_error_bound(t.alpha, delta),
            amplitude_after_error(t.alpha, delta),
        ) else {
            continue;
        };
        s.admissible += 1;
        if t.collapse_error > bound {
            s.error_bound_violations += 1;
        }
        if t.beta < amp {
            s.amplitude_bound_violations += 1;
        }
        s.worst_error_ratio = s.worst_error_ratio.max(t.collapse_error / bound);
    }
    s
}
