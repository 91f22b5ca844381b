//! Two shield patterns over the same cluster states: the bound is the larger of the two
//! patch free energies, optimized jointly.
//!
//! ```bash
//! cargo run --release --example multi_patch
//! ```

use qmed::lattice::{LatticeKind, ModelSpec, ShieldTemplate};
use qmed::med::{minimize_ti, multi_patch_minimize, MarkovProblem, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelSpec::heisenberg(1.0);
    let cfg = SolverConfig::default();
    let t = 0.6;
    let near = ShieldTemplate::chain(2);
    let gapped = ShieldTemplate::new(vec![(-1, 0), (-3, 0)])?;

    for (name, tpl) in [("near", &near), ("gapped", &gapped)] {
        let r = minimize_ti(LatticeKind::TiChain, &model, tpl, t, &cfg)?;
        println!("{name:<7} {:<12} F = {:.8}", tpl.render(), r.free_energy);
    }
    let both = MarkovProblem::translation_invariant_patches(LatticeKind::TiChain, &model, &[near, gapped])?;
    let r = multi_patch_minimize(&both, t, &cfg)?;
    println!("joint   F = {:.8}  patches = {:?}", r.free_energy, r.patch_free_energies);
    Ok(())
}
