// Closed-form probability and precision bounds, with a Monte Carlo check of
// the collapse-error bound.

use qrls::theory::*;

fn main() -> qrls::Result<()> {
    for l in [1, 2, 4, 8] {
        println!(
            "l = {l}: p ≥ {:.3}, δ(ε=0.1) = {:.3e}, worst α = {:.3}",
            success_lower_bound(l, l - 1)?,
            delta_for_epsilon(0.1, l)?,
            worst_case_alpha(l)?
        );
    }
    for r in [0.1, 0.3, 0.5] {
        println!(
            "guess ratio {r}: p ≥ {:.4}",
            success_lower_bound_with_guess(r, 1.0)?
        );
    }
    println!("p' ≥ {} for ε = 0.5", p_prime_bound(0.5)?);

    let s = monte_carlo_collapse(1, 10_000, 4, 0.05);
    println!(
        "{} admissible pairs, {} + {} violations, worst error/bound = {:.3}",
        s.admissible, s.error_bound_violations, s.amplitude_bound_violations, s.worst_error_ratio
    );
    Ok(())
}
