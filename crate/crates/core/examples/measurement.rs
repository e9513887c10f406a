// Index-register probabilities, seeded sampling and the repeat-until-success loop.

use qrls::blocksys::BlockSystem;
use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::iterate::Scheme;
use qrls::measure::{register_probabilities, run_qrls, Policy, RunConfig, Sampler};
use qrls::qlsa::exact_oracle;
use qrls::theory::success_lower_bound;

fn main() -> qrls::Result<()> {
    let (a, b) = assemble(&ProblemSpec::one_d(Case::A, 16)?)?;
    let scheme = Scheme::richardson(spectral_bounds(&a, BoundsMethod::Analytic)?)?;
    let x0 = vec![0.0; a.n_rows()];
    let (l, c) = (4, 3);

    let sys = BlockSystem::new(&a, &b, &x0, &scheme, l, c)?;
    let dist = register_probabilities(&exact_oracle(&sys)?.state, l, c)?;
    let p: Vec<String> = dist
        .probabilities
        .iter()
        .map(|p| format!("{p:.3}"))
        .collect();
    println!("p_i = [{}]", p.join(", "));
    println!(
        "p_success = {:.4} ≥ {}",
        dist.p_success,
        success_lower_bound(l, c)?
    );

    let mut sampler = Sampler::new(7);
    let hits = (0..10_000)
        .filter(|_| dist.is_success(sampler.draw(&dist)))
        .count();
    println!("empirical success frequency: {:.4}", hits as f64 / 1e4);

    for policy in [Policy::Discard, Policy::RestartWithIterate] {
        let mut cfg = RunConfig::new(l, 0.1, 3);
        cfg.policy = policy;
        let run = run_qrls(&a, &b, &x0, &scheme, &cfg)?;
        println!(
            "{policy}: outcome {} after {} attempt(s), δ = {:.2e}, degree {}, discrepancy {:.2e}",
            run.outcome_index,
            run.attempts,
            run.delta_used,
            run.degree_used,
            run.discrepancy_vs_classical.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
