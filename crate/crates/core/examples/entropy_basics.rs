//! Labeled density matrices, partial traces, entropies and the ⊙-product.
//!
//! ```bash
//! cargo run --example entropy_basics
//! ```

use faer::c64;
use qmed::opalg::{cmi, conditional_entropy, matrix_exp, odot, vn_entropy, DensityMatrix, SiteSpace};
use qmed::opalg::random::random_hermitian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = c64::new(0.0, 0.0);
    let ghz = DensityMatrix::pure(SiteSpace::qubits([0, 1, 2]), &[c64::new(s, 0.0), z, z, z, z, z, z, c64::new(s, 0.0)])?;
    println!("GHZ: S = {:.4}, S(0) = {:.4}", vn_entropy(&ghz), vn_entropy(&ghz.partial_trace(&[0])?));
    println!("     S(0|1,2) = {:+.4}", conditional_entropy(&ghz, &[0])?);
    println!("     I(0;2|1) = {:.4}", cmi(&ghz, &[0], &[1], &[2])?);

    // ⊙ adds logarithms: exp(X) ⊙ exp(Y) = exp(X + Y) even when X and Y do not commute
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_hermitian(&SiteSpace::qubits([0, 1]), &mut rng);
    let y = random_hermitian(&SiteSpace::qubits([1, 2]), &mut rng);
    let lhs = odot(&matrix_exp(&x)?, &matrix_exp(&y)?)?;
    let rhs = matrix_exp(&x.embed(lhs.space())?.add_scaled(&y, 1.0)?)?;
    println!("‖exp X ⊙ exp Y − exp(X+Y)‖_F = {:.2e}", lhs.add_scaled(&rhs, -1.0)?.frobenius_norm());
    Ok(())
}
