// Embed relaxation steps in the block-bidiagonal system and check its conditioning.

use qrls::blocksys::{block, verify_lemma3, verify_lemma3_spectral, BlockSystem};
use qrls::fem::{assemble, spectral_bounds, BoundsMethod, Case, ProblemSpec};
use qrls::iterate::{run_iterations, Scheme};
use qrls::linalg::dense_solve;

fn main() -> qrls::Result<()> {
    let (a, b) = assemble(&ProblemSpec::one_d(Case::B, 16)?)?;
    let scheme = Scheme::richardson(spectral_bounds(&a, BoundsMethod::Analytic)?)?;
    let (l, c) = (4, 3);
    let x0 = vec![0.0; a.n_rows()];
    let sys = BlockSystem::new(&a, &b, &x0, &scheme, l, c)?;
    println!(
        "M is {0}x{0}, nnz {1}, {2} + {3} qubits",
        sys.dim(),
        sys.m.nnz(),
        sys.index_qubits(),
        sys.system_qubits()
    );

    let x = dense_solve(&sys.m, &sys.y)?;
    let traj = run_iterations(&a, &b, &x0, &scheme, l, None)?;
    for i in 0..=l + c {
        let diff = traj.iterates[i.min(l)].distance(block(&x, i, sys.n));
        println!("block {i}: ‖x_i − iterate‖ = {diff:.1e}");
    }

    let dense = verify_lemma3(&sys.m, l, c)?;
    let fast = verify_lemma3_spectral(&a, &scheme, l, c)?;
    println!(
        "‖M‖ = {:.4} ≤ 2, ‖M⁻¹‖ = {:.4} ≤ {}, κ_M = {:.4} ≤ {} (spectral route: {:.4})",
        dense.norm_m,
        dense.norm_m_inv,
        dense.bound_inv,
        dense.kappa_m,
        dense.bound_kappa,
        fast.kappa_m
    );
    println!("{}", sys.metadata());
    Ok(())
}
