//! End-to-end runs across modules.

use qrls::blocksys::BlockSystem;
use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::iterate::Scheme;
use qrls::linalg::{dense_solve, DenseOracle};
use qrls::measure::{collapse, register_probabilities, run_qrls, RunConfig, Sampler};
use qrls::qlsa::{
    apply_qlsa, collapse_adversary, exact_oracle, exact_plus_noise, probability_adversary,
    Perturbation,
};
use qrls::theory;

fn setup(
    spec: ProblemSpec,
) -> (
    qrls::linalg::SparseMatrix,
    qrls::linalg::DenseVector,
    Scheme,
) {
    let (a, b) = assemble(&spec).unwrap();
    let scheme =
        Scheme::richardson(spectral_bounds(&a, BoundsMethod::DenseExact).unwrap()).unwrap();
    (a, b, scheme)
}

#[test]
fn collapsed_block_matches_exact_normalized_block() {
    let (a, b, scheme) = setup(ProblemSpec::two_d(Case::A, 5).unwrap());
    let (l, c) = (4, 3);
    let sys = BlockSystem::new(&a, &b, &vec![0.0; a.n_rows()], &scheme, l, c).unwrap();
    let delta = 1e-6;
    let poly = apply_qlsa(&sys, delta).unwrap();
    let x = dense_solve(&sys.m, &sys.y).unwrap();
    let dist = register_probabilities(&poly.state, l, c).unwrap();
    let mut sampler = Sampler::new(5);
    for _ in 0..50 {
        let j = sampler.draw(&dist);
        let exact_block = qrls::linalg::DenseVector::from(&x[j * sys.n..(j + 1) * sys.n])
            .normalized()
            .unwrap();
        let got = collapse(&poly.state, j).unwrap();
        let amp = (x[j * sys.n..(j + 1) * sys.n]
            .iter()
            .map(|v| v * v)
            .sum::<f64>())
        .sqrt()
            / x.norm();
        let bound = theory::post_measurement_error_bound(amp, delta).unwrap();
        assert!(got.distance(&exact_block) <= bound, "block {j}");
    }
}

#[test]
fn exact_oracle_agrees_with_polynomial_solve() {
    for spec in [
        ProblemSpec::one_d(Case::B, 8).unwrap(),
        ProblemSpec::two_d(Case::C, 4).unwrap(),
    ] {
        let (a, b, scheme) = setup(spec);
        let sys = BlockSystem::new(&a, &b, &vec![0.0; a.n_rows()], &scheme, 2, 1).unwrap();
        let e = exact_oracle(&sys).unwrap();
        let p = apply_qlsa(&sys, 1e-9).unwrap();
        assert!(e.state.distance(&p.state) <= 1e-9);
    }
}

#[test]
fn injected_worst_case_error_stays_within_target() {
    let (a, b, scheme) = setup(ProblemSpec::one_d(Case::A, 8).unwrap());
    for (l, eps) in [(2, 0.5), (4, 0.1)] {
        let sys = BlockSystem::new(&a, &b, &vec![0.0; a.n_rows()], &scheme, l, l - 1).unwrap();
        let exact = exact_oracle(&sys).unwrap();
        let delta = theory::delta_for_epsilon(eps, l).unwrap();
        let dir = probability_adversary(&exact.state, sys.success_range()).unwrap();
        let noisy = exact_plus_noise(&sys, delta, &Perturbation::Direction(dir)).unwrap();
        let dist = register_probabilities(&noisy.state, l, l - 1).unwrap();
        assert!(dist.p_success >= theory::p_prime_bound(eps).unwrap());
        for j in sys.success_range() {
            let dir = collapse_adversary(&exact.state, j).unwrap();
            let noisy = exact_plus_noise(&sys, delta, &Perturbation::Direction(dir)).unwrap();
            let err = collapse(&noisy.state, j)
                .unwrap()
                .distance(&collapse(&exact.state, j).unwrap());
            assert!(err <= eps, "l={l} j={j}: {err}");
        }
    }
}

#[test]
fn mean_attempts_match_geometric_expectation() {
    let (a, b, scheme) = setup(ProblemSpec::one_d(Case::A, 4).unwrap());
    let eps = 0.5;
    let runs = 200;
    let mut total = 0;
    for seed in 0..runs {
        let mut cfg = RunConfig::new(4, eps, seed);
        cfg.solver = qrls::measure::Solver::Exact;
        total += run_qrls(&a, &b, &vec![0.0; a.n_rows()], &scheme, &cfg)
            .unwrap()
            .attempts;
    }
    assert!(total as f64 / runs as f64 <= 2.0 / (1.0 - eps));
}

#[test]
fn dense_oracle_refuses_oversized_input() {
    let big = qrls::linalg::SparseMatrix::identity(20);
    let err = DenseOracle::with_cap(10).singular_values(&big).unwrap_err();
    assert_eq!(err.kind(), "size_cap");
}
