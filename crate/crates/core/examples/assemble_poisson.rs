// Assemble the Poisson test problems and compare spectral-bound estimates.

use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::linalg::write_matrix_market;

fn main() -> qrls::Result<()> {
    for spec in [
        ProblemSpec::one_d(Case::A, 8)?,
        ProblemSpec::one_d(Case::B, 8)?,
        ProblemSpec::two_d(Case::A, 5)?,
        ProblemSpec::two_d(Case::B, 5)?,
        ProblemSpec::two_d(Case::C, 4)?,
    ] {
        let (a, b) = assemble(&spec)?;
        let exact = spectral_bounds(&a, BoundsMethod::DenseExact)?;
        let gersh = spectral_bounds(&a, BoundsMethod::Gershgorin)?;
        println!(
            "{spec}: {} unknowns, nnz {}, ‖b‖ = {:.3e}, λ ∈ [{:.4}, {:.4}], κ = {:.2}, Gershgorin b = {:.1}",
            a.n_rows(),
            a.nnz(),
            b.norm(),
            exact.a,
            exact.b,
            exact.condition_number(),
            gersh.b,
        );
    }

    let (a, _) = assemble(&ProblemSpec::one_d(Case::A, 5)?)?;
    let mut text = Vec::new();
    write_matrix_market(&a, &mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    Ok(())
}
