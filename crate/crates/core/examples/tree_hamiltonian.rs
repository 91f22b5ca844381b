//! A classical Markov tree: rebuild it from edge marginals, read off a commuting
//! Hamiltonian and check the Hammersley–Clifford factorization.
//!
//! ```bash
//! cargo run --release --example tree_hamiltonian
//! ```

use qmed::markovnet::{classical_tree_hamiltonian, hammersley_clifford_verify, tree_reconstruct, TreeGraph};
use qmed::opalg::random::random_distribution;
use qmed::opalg::DensityMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    //      0
    //     / \
    //    1   2
    //   / \
    //  3   4
    let tree = TreeGraph::new(vec![None, Some(0), Some(0), Some(1), Some(1)], vec![2; 5])?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let root = random_distribution(2, &mut rng);
    let cond: Vec<[Vec<f64>; 2]> = (0..5)
        .map(|_| [random_distribution(2, &mut rng), random_distribution(2, &mut rng)])
        .collect();
    let p: Vec<f64> = (0..32usize)
        .map(|idx| {
            let x: Vec<usize> = (0..5).map(|k| (idx >> (4 - k)) & 1).collect();
            (1..5).fold(root[x[0]], |acc, k| acc * cond[k][x[tree.parent(k).unwrap()]][x[k]])
        })
        .collect();
    let rho = DensityMatrix::classical(tree.space(), &p)?;

    let edges: Vec<DensityMatrix> = (1..5)
        .map(|k| rho.partial_trace(&[tree.parent(k).unwrap(), k]))
        .collect::<Result<_, _>>()?;
    let rebuilt = tree_reconstruct(&tree, &edges, Some(&rho))?;
    println!("reconstruction error = {:.2e}", rebuilt.trace_distance.unwrap());

    let h = classical_tree_hamiltonian(&rho, &tree)?;
    println!(
        "{} terms, max commutator = {:.1e}, Z = {:.12}, residual = {:.2e}",
        h.terms.len(),
        h.max_commutator,
        h.partition_function,
        h.residual
    );

    let hc = hammersley_clifford_verify(&p, &tree)?;
    println!("factorizes on the tree: {} (residual {:.2e})", hc.factorizes, hc.residual);
    let path = TreeGraph::path(5);
    let wrong = hammersley_clifford_verify(&p, &path)?;
    println!("factorizes on a path:   {} (residual {:.2e})", wrong.factorizes, wrong.residual);
    Ok(())
}
