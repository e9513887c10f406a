// Richardson, damped Jacobi and Chebyshev relaxation on a 1D problem.

use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::iterate::{
    convergence_factor, relative_error_history, required_iterations, Preconditioner, Scheme,
};
use qrls::linalg::dense_solve;

fn main() -> qrls::Result<()> {
    let (a, b) = assemble(&ProblemSpec::one_d(Case::A, 32)?)?;
    let bounds = spectral_bounds(&a, BoundsMethod::Analytic)?;
    let x_exact = dense_solve(&a, &b)?;
    let x0 = vec![0.0; a.n_rows()];
    let eps = 1e-6;
    let l = required_iterations(&bounds, eps)?;
    println!(
        "κ = {:.1}, ρ = {:.5}, predicted l = {l}",
        bounds.condition_number(),
        convergence_factor(&bounds)?
    );

    // The interior stencil has constant diagonal 2, so Jacobi is a rescaled Richardson.
    let jacobi_bounds = qrls::fem::SpectralBounds::supplied(bounds.a / 2.0, bounds.b / 2.0);
    for (name, scheme) in [
        ("richardson", Scheme::richardson(bounds)?),
        (
            "jacobi ω=0.9",
            Scheme::damped(Preconditioner::Jacobi, 0.9, jacobi_bounds)?,
        ),
    ] {
        let errs = relative_error_history(&a, &b, &x0, &scheme, l, &x_exact)?;
        println!("{name:>14}: ‖e_l‖/‖e_0‖ = {:.3e} after {l} steps", errs[l]);
    }

    // Chebyshev steps need about √κ times fewer iterations, but applied in
    // natural node order the intermediate growth amplifies rounding as l grows.
    for steps in [10, 20, 30, 40] {
        let scheme = Scheme::chebyshev(Preconditioner::Identity, bounds, steps)?;
        let errs = relative_error_history(&a, &b, &x0, &scheme, steps, &x_exact)?;
        let peak = errs.iter().copied().fold(0.0, f64::max);
        println!(
            "chebyshev l={steps:>2}: ‖e_l‖/‖e_0‖ = {:.3e}, peak {peak:.1e}",
            errs[steps]
        );
    }
    Ok(())
}
