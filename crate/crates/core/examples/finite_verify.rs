//! Finite open chain: MED bounds against exact diagonalization for several shield radii.
//!
//! ```bash
//! cargo run --release --example finite_verify
//! ```

use qmed::lattice::{build_lattice, Boundary, LatticeSpec, ModelSpec, Neighborhood, TermAssignment};
use qmed::med::{minimize_finite, SolverConfig};
use qmed::oracle::exact_free_energy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 6;
    let lm = build_lattice(&LatticeSpec::chain(n, Boundary::Open), &ModelSpec::tfim(1.0, 0.8))?;
    let h = lm.hamiltonian()?;
    let cfg = SolverConfig::default();

    for t in [0.3, 1.0] {
        let exact = exact_free_energy(&h, t, n, false)?;
        println!("T = {t}: exact F/N = {:.8}", exact.free_energy_per_site);
        for r in 1..=2 {
            let res = minimize_finite(&lm, &Neighborhood::Radius(r), TermAssignment::HighestSite, t, &cfg)?;
            println!(
                "  radius {r}: F_MED/N = {:.8}  gap = {:.2e}  residual = {:.1e}  {}",
                res.free_energy,
                exact.free_energy_per_site - res.free_energy,
                res.residual,
                res.status()
            );
        }
    }
    Ok(())
}
