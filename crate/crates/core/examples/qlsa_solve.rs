// Emulated linear-system solve against the dense oracle, plus the noise channel.

use qrls::blocksys::BlockSystem;
use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::iterate::Scheme;
use qrls::measure::collapse;
use qrls::qlsa::{apply_qlsa, collapse_adversary, exact_oracle, exact_plus_noise, Perturbation};

fn main() -> qrls::Result<()> {
    let (a, b) = assemble(&ProblemSpec::two_d(Case::B, 5)?)?;
    let scheme = Scheme::richardson(spectral_bounds(&a, BoundsMethod::DenseExact)?)?;
    let sys = BlockSystem::new(&a, &b, &vec![0.0; a.n_rows()], &scheme, 4, 3)?;
    let exact = exact_oracle(&sys)?;
    for delta in [1e-3, 1e-6, 1e-9] {
        let r = apply_qlsa(&sys, delta)?;
        println!(
            "δ = {delta:.0e}: degree {:>4}, ‖x − x_exact‖ = {:.2e}",
            r.degree_used,
            r.state.distance(&exact.state)
        );
    }

    let dir = collapse_adversary(&exact.state, sys.l)?;
    let noisy = exact_plus_noise(&sys, 1e-2, &Perturbation::Direction(dir))?;
    println!(
        "injected error {:.3e} moves the collapsed final iterate by {:.3e}",
        noisy.state.distance(&exact.state),
        collapse(&noisy.state, sys.l)?.distance(&collapse(&exact.state, sys.l)?)
    );
    Ok(())
}
