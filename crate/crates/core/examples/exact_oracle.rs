//! Exact reference values: dense diagonalization of finite chains approaching the
//! transfer-matrix free energy of the infinite classical chain.
//!
//! ```bash
//! cargo run --release --example exact_oracle
//! ```

use qmed::lattice::{build_lattice, Boundary, LatticeSpec, ModelSpec};
use qmed::oracle::{exact_free_energy, ising_transfer_free_energy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (j, h, t) = (1.0, 0.3, 0.8);
    let model = ModelSpec::classical_ising(j, h);
    println!("infinite chain: F/N = {:.10}", ising_transfer_free_energy(j, h, t));
    for n in [4, 6, 8, 10] {
        let lm = build_lattice(&LatticeSpec::chain(n, Boundary::Periodic), &model)?;
        let r = exact_free_energy(&lm.hamiltonian()?, t, n, false)?;
        println!(
            "ring of {n:>2}:     F/N = {:.10}  E/N = {:+.6}  S/N = {:.6}",
            r.free_energy_per_site,
            r.energy_per_site(),
            r.entropy_per_site()
        );
    }
    Ok(())
}
