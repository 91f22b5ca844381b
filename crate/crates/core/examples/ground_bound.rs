//! Ground-energy lower bound from the temperature where the Markov entropy crosses zero,
//! compared with exact diagonalization of a small ring.
//!
//! ```bash
//! cargo run --release --example ground_bound
//! ```

use qmed::lattice::{build_lattice, Boundary, LatticeKind, LatticeSpec, ModelSpec, ShieldTemplate};
use qmed::med::{ground_energy_lower_bound, temperature_sweep, BoundSearch, MarkovProblem, SolverConfig};
use qmed::oracle::ground_energy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelSpec::heisenberg(1.0);
    let cfg = SolverConfig::default();
    let problem = MarkovProblem::translation_invariant(LatticeKind::TiChain, &model, &ShieldTemplate::chain(3))?;
    let sweep = temperature_sweep(&problem, &[0.05, 0.1, 0.15, 0.2, 0.3, 0.5], &cfg)?;
    for row in &sweep.rows {
        let r = &row.result;
        println!("T = {:<5} F = {:.6}  S_M = {:+.6}", r.temperature, r.free_energy, r.markov_entropy);
    }

    let bound = ground_energy_lower_bound(&problem, &sweep, &cfg, &BoundSearch::default())?;
    let ring = build_lattice(&LatticeSpec::chain(8, Boundary::Periodic), &model)?;
    let e0 = ground_energy(&ring.hamiltonian()?)? / 8.0;
    println!("\nE0 per site ≥ {:.6} (T = {:.4}, {} refinements)", bound.bound, bound.temperature, bound.refinements.len());
    println!("8-site ring E0 per site = {e0:.6}");
    if let Some(note) = bound.note {
        println!("note: {note}");
    }
    Ok(())
}
