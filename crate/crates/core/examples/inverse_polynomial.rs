// Certified odd polynomial approximations of 1/x and their degree growth.

use qrls::qlsa::{build_inverse_poly, InverseApproximant};

fn main() -> qrls::Result<()> {
    for (kappa, delta) in [(10.0, 1e-6), (16.0, 1e-9), (32.0, 1e-9), (50.0, 1e-9)] {
        let p = build_inverse_poly(kappa, delta)?;
        println!(
            "κ = {kappa:>4}, δ = {delta:.0e}: degree {:>5} (κ ln(1/δ) = {:>6.0}), grid error {:.2e}, Σ|c| = {:.1}",
            p.degree,
            kappa * (1.0 / delta).ln(),
            p.certified_error,
            p.coefficient_l1()
        );
    }

    let p = build_inverse_poly(4.0, 1e-4)?;
    let mut text = Vec::new();
    p.write_text(&mut text)?;
    let back = InverseApproximant::read_text(text.as_slice())?;
    println!(
        "round trip of {} coefficients: {}",
        back.coefficients.len(),
        back == p
    );
    println!("P(0.5) = {:.6}, P(-0.5) = {:.6}", p.eval(0.5), p.eval(-0.5));
    Ok(())
}
