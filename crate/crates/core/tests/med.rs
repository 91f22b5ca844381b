use qmed::lattice::{
    build_lattice, Boundary, LatticeKind, LatticeSpec, ModelSpec, Neighborhood, ShieldTemplate, TermAssignment,
};
use qmed::med::*;
use qmed::opalg::random::{random_density_matrix, random_hermitian};
use qmed::opalg::{vn_entropy, DensityMatrix, HermitianOperator};
use qmed::oracle::{exact_free_energy, gibbs_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn heisenberg_chain(n: usize, boundary: Boundary) -> qmed::lattice::LatticeModel {
    build_lattice(&LatticeSpec::chain(n, boundary), &ModelSpec::heisenberg(1.0)).unwrap()
}

#[test]
fn maximally_mixed_gives_minus_t_ln2() {
    let p = MarkovProblem::translation_invariant(LatticeKind::TiChain, &ModelSpec::heisenberg(1.0), &ShieldTemplate::chain(2))
        .unwrap();
    let vars = ClusterVariables::maximally_mixed(&p);
    for t in [0.5, 1.0, 3.0] {
        let parts = markov_free_energy(&p, &vars, t).unwrap();
        assert!(parts.energy.abs() < 1e-14);
        assert!((parts.markov_entropy[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((parts.free_energy[0] + t * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(parts.residual < 1e-15);
    }
}

#[test]
fn global_state_parts_match_direct_entropies() {
    let lm = heisenberg_chain(6, Boundary::Open);
    let h = lm.hamiltonian().unwrap();
    let rho = gibbs_state(&h, 0.8).unwrap();
    for r in 1..=3 {
        let p = MarkovProblem::finite(&lm, &[Neighborhood::Radius(r)], TermAssignment::HighestSite).unwrap();
        let vars = ClusterVariables::from_global(&p, &rho).unwrap();
        let parts = markov_free_energy(&p, &vars, 0.8).unwrap();
        assert!((parts.energy - rho.expectation(&h).unwrap()).abs() < 1e-10);
        assert!(parts.residual < 1e-12);
        // open chain, raster order: the shield of k is {k−r, …, k−1}
        let mut direct = 0.0;
        for k in 0..6usize {
            let lo = k.saturating_sub(r);
            let cluster: Vec<usize> = (lo..=k).collect();
            let shield: Vec<usize> = (lo..k).collect();
            direct += vn_entropy(&rho.partial_trace(&cluster).unwrap());
            if !shield.is_empty() {
                direct -= vn_entropy(&rho.partial_trace(&shield).unwrap());
            }
        }
        assert!((parts.markov_entropy[0] - direct).abs() < 1e-10, "r = {r}");
        assert!(parts.markov_entropy[0] >= vn_entropy(&rho) - 1e-8);
    }
}

#[test]
fn markov_entropy_shrinks_with_the_shield() {
    let lm = heisenberg_chain(6, Boundary::Open);
    let rho = gibbs_state(&lm.hamiltonian().unwrap(), 0.5).unwrap();
    let mut previous = f64::INFINITY;
    for r in 1..=5 {
        let p = MarkovProblem::finite(&lm, &[Neighborhood::Radius(r)], TermAssignment::HighestSite).unwrap();
        let s = markov_free_energy(&p, &ClusterVariables::from_global(&p, &rho).unwrap(), 0.5)
            .unwrap()
            .markov_entropy[0];
        assert!(s <= previous + 1e-10);
        previous = s;
    }
    // the full shield is the chain rule
    assert!((previous - vn_entropy(&rho)).abs() < 1e-9);
}

#[test]
fn euclidean_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lm = heisenberg_chain(5, Boundary::Open);
    let p = MarkovProblem::finite(&lm, &[Neighborhood::Radius(2)], TermAssignment::HighestSite).unwrap();
    let states: Vec<DensityMatrix> = p
        .variables()
        .iter()
        .map(|v| {
            // keep the spectrum away from zero so the logarithms stay smooth
            let r = random_density_matrix(v, v.dim(), &mut rng);
            let mixed = DensityMatrix::maximally_mixed(v.clone());
            DensityMatrix::new(r.as_operator().scale(0.5).add_scaled(mixed.as_operator(), 0.5).unwrap()).unwrap()
        })
        .collect();
    let vars = ClusterVariables::new(&p, states.clone()).unwrap();
    let t = 0.7;
    let grads = free_energy_gradient(&p, &vars, t, 0).unwrap();
    for (i, v) in p.variables().iter().enumerate() {
        let raw = random_hermitian(v, &mut rng);
        let tr = raw.trace() / v.dim() as f64;
        let d = raw.add_scaled(&HermitianOperator::identity(v.clone()), -tr).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| {
            let mut st = states.clone();
            st[i] = DensityMatrix::new(states[i].as_operator().add_scaled(&d, s).unwrap()).unwrap();
            markov_free_energy(&p, &ClusterVariables::new(&p, st).unwrap(), t).unwrap().free_energy[0]
        };
        let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
        let analytic = grads[i].trace_product(&d).unwrap();
        assert!((numeric - analytic).abs() <= 1e-6 * analytic.abs().max(1.0), "{numeric} vs {analytic}");
    }
}

#[test]
fn free_energy_is_convex_in_the_cluster_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = MarkovProblem::translation_invariant(LatticeKind::TiChain, &ModelSpec::heisenberg(1.0), &ShieldTemplate::chain(2))
        .unwrap();
    let draw = |rng: &mut ChaCha8Rng| {
        let states = p.variables().iter().map(|v| random_density_matrix(v, 3, rng)).collect();
        ClusterVariables::new(&p, states).unwrap()
    };
    for _ in 0..10 {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let fa = markov_free_energy(&p, &a, 0.6).unwrap().free_energy[0];
        let fb = markov_free_energy(&p, &b, 0.6).unwrap().free_energy[0];
        for lambda in [0.25, 0.5, 0.75] {
            let mixed = markov_free_energy(&p, &a.mix(&b, lambda).unwrap(), 0.6).unwrap().free_energy[0];
            assert!(mixed <= lambda * fa + (1.0 - lambda) * fb + 1e-12);
        }
    }
}

#[test]
fn bigger_shields_give_tighter_bounds() {
    let cfg = SolverConfig::default();
    let model = ModelSpec::heisenberg(1.0);
    let t = 0.5;
    let f: Vec<f64> = (1..=3)
        .map(|n| minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(n), t, &cfg).unwrap())
        .map(|r| {
            assert!(r.converged);
            r.free_energy
        })
        .collect();
    assert!(f[0] <= f[1] + 1e-6 && f[1] <= f[2] + 1e-6, "{f:?}");
}

#[test]
fn finite_bound_below_exact() {
    let lm = heisenberg_chain(6, Boundary::Open);
    let h = lm.hamiltonian().unwrap();
    let cfg = SolverConfig::default();
    for t in [0.4, 1.0, 2.5] {
        let exact = exact_free_energy(&h, t, 6, false).unwrap().free_energy_per_site;
        let r = minimize_finite(&lm, &Neighborhood::Radius(1), TermAssignment::HighestSite, t, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.residual <= 1e-6);
        assert!(r.free_energy <= exact + 1e-6, "T = {t}: {} > {exact}", r.free_energy);
    }
}

#[test]
fn whole_chain_cluster_is_exact() {
    let lm = heisenberg_chain(4, Boundary::Open);
    let exact = exact_free_energy(&lm.hamiltonian().unwrap(), 0.9, 4, false).unwrap();
    let r = minimize_finite(&lm, &Neighborhood::Radius(3), TermAssignment::HighestSite, 0.9, &SolverConfig::default())
        .unwrap();
    assert!(r.converged);
    assert!((r.free_energy - exact.free_energy_per_site).abs() < 1e-7);
}

#[test]
fn multi_patch_is_at_least_each_patch() {
    let cfg = SolverConfig::default();
    let model = ModelSpec::heisenberg(1.0);
    let t = 0.6;
    let a = ShieldTemplate::chain(2);
    let b = ShieldTemplate::new(vec![(-1, 0), (-3, 0)]).unwrap();
    let both = MarkovProblem::translation_invariant_patches(LatticeKind::TiChain, &model, &[a.clone(), b.clone()]).unwrap();
    let r = multi_patch_minimize(&both, t, &cfg).unwrap();
    assert!(r.converged);
    assert_eq!(r.patch_free_energies.len(), 2);
    let fa = minimize_ti(LatticeKind::TiChain, &model, &a, t, &cfg).unwrap().free_energy;
    let fb = minimize_ti(LatticeKind::TiChain, &model, &b, t, &cfg).unwrap().free_energy;
    assert!(r.free_energy >= fa.max(fb) - 1e-6, "{} vs {fa} {fb}", r.free_energy);
    // at the optimum the binding patch attains the maximum
    let top = r.patch_free_energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((top - r.free_energy).abs() < 1e-12);
}

#[test]
fn sweep_is_concave_in_temperature() {
    let p = MarkovProblem::translation_invariant(LatticeKind::TiChain, &ModelSpec::heisenberg(1.0), &ShieldTemplate::chain(2))
        .unwrap();
    let grid = [0.3, 0.5, 0.8, 1.2, 2.0];
    let sweep = temperature_sweep(&p, &grid, &SolverConfig::default()).unwrap();
    assert!(sweep.all_converged());
    assert_eq!(sweep.temperatures(), grid.to_vec());
    assert!(sweep.rows[0].specific_heat.is_none() && sweep.rows[4].specific_heat.is_none());
    for row in &sweep.rows[1..4] {
        assert!(row.specific_heat.unwrap() >= -1e-4);
    }
    let cold = SolverConfig {
        warm_start: false,
        ..SolverConfig::default()
    };
    let independent = temperature_sweep(&p, &grid, &cold).unwrap();
    for (a, b) in sweep.rows.iter().zip(&independent.rows) {
        assert!((a.result.free_energy - b.result.free_energy).abs() < 1e-6);
    }
}

#[test]
fn bound_reports_missing_crossing() {
    let p = MarkovProblem::translation_invariant(LatticeKind::TiChain, &ModelSpec::classical_ising(1.0, 0.0), &ShieldTemplate::chain(1))
        .unwrap();
    let cfg = SolverConfig::default();
    let sweep = temperature_sweep(&p, &[0.5, 1.0, 2.0], &cfg).unwrap();
    let b = ground_energy_lower_bound(&p, &sweep, &cfg, &BoundSearch::default()).unwrap();
    assert!(!b.bracketed);
    assert_eq!(b.note.as_deref(), Some("crossing not bracketed"));
    let best = sweep.rows.iter().map(|r| r.result.free_energy).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(b.bound, best);
}

#[test]
fn spin_flip_projection_keeps_the_optimum() {
    let model = ModelSpec::heisenberg(1.0);
    let plain = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), 0.7, &SolverConfig::default()).unwrap();
    let cfg = SolverConfig {
        spin_flip_symmetry: true,
        ..SolverConfig::default()
    };
    let sym = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), 0.7, &cfg).unwrap();
    assert!((plain.free_energy - sym.free_energy).abs() < 1e-7);
    let biased = ModelSpec {
        field: 0.3,
        ..model
    };
    assert!(minimize_ti(LatticeKind::TiChain, &biased, &ShieldTemplate::chain(1), 0.7, &cfg).is_err());
}

#[test]
fn seeded_noise_start_reaches_the_same_point() {
    let model = ModelSpec::heisenberg(1.0);
    let noisy = SolverConfig {
        init_noise: 0.3,
        seed: 5,
        ..SolverConfig::default()
    };
    let a = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), 0.7, &noisy).unwrap();
    let b = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), 0.7, &SolverConfig::default()).unwrap();
    assert!((a.free_energy - b.free_energy).abs() < 1e-7);
    let again = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), 0.7, &noisy).unwrap();
    assert_eq!(a.free_energy, again.free_energy);
}

#[test]
fn rejects_bad_input() {
    let model = ModelSpec::heisenberg(1.0);
    let cfg = SolverConfig::default();
    for t in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(
            minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(1), t, &cfg),
            Err(MedError::BadTemperature(_))
        ));
    }
    let bad = SolverConfig {
        penalty_growth: 0.5,
        ..SolverConfig::default()
    };
    assert!(matches!(
        minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(1), 1.0, &bad),
        Err(MedError::InvalidConfig(_))
    ));
    let p = MarkovProblem::translation_invariant(LatticeKind::TiChain, &model, &ShieldTemplate::chain(1)).unwrap();
    assert!(temperature_sweep(&p, &[1.0, 0.5], &cfg).is_err());
    let ring = heisenberg_chain(4, Boundary::Periodic);
    let wrong = ClusterVariables::maximally_mixed(
        &MarkovProblem::finite(&ring, &[Neighborhood::Radius(1)], TermAssignment::HighestSite).unwrap(),
    );
    assert!(markov_free_energy(&p, &wrong, 1.0).is_err());
}
