//! Conditional mutual information along a chain and Petz reconstruction from local
//! marginals: exact for a classical Gibbs chain, approximate for a quantum one.
//!
//! ```bash
//! cargo run --release --example markov_reconstruction
//! ```

use qmed::lattice::{build_lattice, Boundary, LatticeSpec, ModelSpec};
use qmed::markovnet::{chain_marginals, chain_reconstruct, cmi_profile, ReconstructionMethod};
use qmed::oracle::gibbs_state;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 6;
    let ordering: Vec<usize> = (0..n).collect();
    for width in [1, 2] {
        let shields: Vec<Vec<usize>> = (0..n).map(|k| (k.saturating_sub(width)..k).collect()).collect();
        println!("shield width {width}");
        for (name, model) in [
            ("ising", ModelSpec::classical_ising(1.0, 0.2)),
            ("heisenberg", ModelSpec::heisenberg(1.0)),
        ] {
            let lm = build_lattice(&LatticeSpec::chain(n, Boundary::Open), &model)?;
            let rho = gibbs_state(&lm.hamiltonian()?, 0.7)?;
            let profile = cmi_profile(&rho, &ordering, &shields)?;
            let marginals = chain_marginals(&rho, &ordering, &shields)?;
            let petz = chain_reconstruct(&marginals, &ordering, &shields, ReconstructionMethod::Petz, Some(&rho))?;
            let log = chain_reconstruct(&marginals, &ordering, &shields, ReconstructionMethod::AdditiveLog, Some(&rho))?;
            println!(
                "  {name:<10} max CMI = {:.2e}  Petz error = {:.2e}  log-form error = {:.2e}",
                profile.max_cmi(),
                petz.trace_distance.unwrap_or(f64::NAN),
                log.trace_distance.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
