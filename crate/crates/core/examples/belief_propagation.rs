//! Belief propagation on the infinite Heisenberg chain: the retained message rule
//! reproduces the primal bound, the cancelled rule does not.
//!
//! ```bash
//! cargo run --release --example belief_propagation
//! ```

use qmed::bpdual::{solve, BPConfig, ChainProblem, MessageRule};
use qmed::lattice::{LatticeKind, ModelSpec, ShieldTemplate};
use qmed::med::{minimize_ti, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelSpec::heisenberg(1.0);
    let window = 2;
    let problem = ChainProblem::translation_invariant(&model, window)?;
    for t in [0.5, 1.0, 2.0] {
        let primal = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(window), t, &SolverConfig::default())?;
        println!("T = {t}: primal F = {:.8}", primal.free_energy);
        for rule in [MessageRule::Retained, MessageRule::Cancelled] {
            let cfg = BPConfig { rule, ..BPConfig::default() };
            let (state, f) = solve(&problem, t, &cfg)?;
            println!(
                "  {:<9} F = {:.8}  iterations = {:<5} consistency = {:.1e}",
                rule.name(),
                f.free_energy,
                state.iterations,
                f.consistency
            );
        }
    }
    Ok(())
}
