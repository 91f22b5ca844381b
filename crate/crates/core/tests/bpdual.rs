use qmed::bpdual::*;
use qmed::lattice::{build_lattice, Boundary, LatticeKind, LatticeSpec, ModelSpec, Neighborhood, ShieldTemplate, TermAssignment};
use qmed::med::{minimize_finite, minimize_ti, SolverConfig};
use qmed::opalg::random::random_density_matrix;
use qmed::opalg::{matrix_exp, odot, odot_inverse, DensityMatrix, HermitianOperator};
use qmed::oracle::{exact_free_energy, gibbs_state, ising_transfer_free_energy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dense_max_abs_diff(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    assert_eq!(a.space(), b.space());
    let (x, y) = (a.matrix(), b.matrix());
    let mut m: f64 = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            m = m.max((x[(i, j)] - y[(i, j)]).norm());
        }
    }
    m
}

fn unit_trace(op: &HermitianOperator) -> HermitianOperator {
    op.scale(1.0 / op.trace())
}

fn open_problem(model: ModelSpec, n_sites: usize, window: usize) -> ChainProblem {
    let lm = build_lattice(&LatticeSpec::chain(n_sites, Boundary::Open), &model).unwrap();
    ChainProblem::open_chain(&lm, window).unwrap()
}

#[test]
fn single_update_matches_odot_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = ModelSpec {
        field: 0.4,
        ..ModelSpec::heisenberg(1.0)
    };
    let p = open_problem(model, 4, 1);
    let t = 0.8;
    let mut state = BPState::uniform(&p, t);
    for m in state.to_left.iter_mut().chain(state.to_right.iter_mut()) {
        let r = random_density_matrix(m.space(), 2, &mut rng);
        *m = Message::from_operator(m.direction, r.as_operator()).unwrap();
    }
    let cluster = &p.clusters()[1];
    let lambda = matrix_exp(&cluster.hamiltonian.scale(-1.0 / t)).unwrap();
    let from_left = state.to_right[0].operator().unwrap(); // m_{0→1} on site 1
    let from_right = state.to_left[1].operator().unwrap(); // m_{2→1} on site 2
    let rho = unit_trace(&odot(&odot(&lambda, &from_right).unwrap(), &from_left).unwrap());

    let (left, right) = bp_update(&p, &state, 1, MessageRule::Retained).unwrap();
    let expect_left = unit_trace(&odot_inverse(&rho.partial_trace(&[1]).unwrap(), &from_left).unwrap());
    let expect_right = unit_trace(&odot_inverse(&rho.partial_trace(&[2]).unwrap(), &from_right).unwrap());
    assert!(dense_max_abs_diff(&left.unwrap().operator().unwrap(), &expect_left) < 1e-10);
    assert!(dense_max_abs_diff(&right.unwrap().operator().unwrap(), &expect_right) < 1e-10);

    let (left, right) = bp_update(&p, &state, 1, MessageRule::Cancelled).unwrap();
    let expect_left = unit_trace(&odot(&lambda, &from_right).unwrap().partial_trace(&[1]).unwrap());
    let expect_right = unit_trace(&odot(&lambda, &from_left).unwrap().partial_trace(&[2]).unwrap());
    assert!(dense_max_abs_diff(&left.unwrap().operator().unwrap(), &expect_left) < 1e-10);
    assert!(dense_max_abs_diff(&right.unwrap().operator().unwrap(), &expect_right) < 1e-10);

    // chain ends send in one direction only
    let (l, r) = bp_update(&p, &state, 0, MessageRule::Retained).unwrap();
    assert!(l.is_none() && r.is_some());
    assert!(matches!(
        bp_update(&p, &state, 3, MessageRule::Retained),
        Err(BpError::BadCluster { .. })
    ));
}

#[test]
fn classical_chain_beliefs_are_exact_marginals() {
    let model = ModelSpec::classical_ising(1.0, 0.35);
    let n = 6;
    let t = 0.9;
    let p = open_problem(model, n, 1);
    let tight = BPConfig {
        tol: 1e-13,
        ..BPConfig::default()
    };
    let (state, f) = solve(&p, t, &tight).unwrap();
    assert!(state.converged);
    let lm = build_lattice(&LatticeSpec::chain(n, Boundary::Open), &model).unwrap();
    let h = lm.hamiltonian().unwrap();
    let gibbs = gibbs_state(&h, t).unwrap();
    let beliefs = beliefs_from_messages(&p, &state).unwrap();
    for (j, b) in beliefs.clusters.iter().enumerate() {
        let exact = gibbs.partial_trace(&[j, j + 1]).unwrap();
        assert!(b.trace_distance(&exact).unwrap() < 1e-9, "cluster {j}");
    }
    let exact = exact_free_energy(&h, t, n, false).unwrap();
    assert!((f.free_energy - exact.free_energy_per_site).abs() < 1e-8);
}

#[test]
fn infinite_classical_chain_matches_transfer_matrix() {
    for (j, h, t) in [(1.0, 0.0, 1.0), (1.0, 0.3, 0.7), (-0.5, 0.2, 1.5)] {
        let p = ChainProblem::translation_invariant(&ModelSpec::classical_ising(j, h), 1).unwrap();
        let (state, f) = solve(&p, t, &BPConfig::default()).unwrap();
        assert!(state.converged);
        assert!((f.free_energy - ising_transfer_free_energy(j, h, t)).abs() < 1e-8, "{j} {h} {t}");
    }
}

#[test]
fn retained_fixed_point_is_consistent_cancelled_is_not() {
    let p = ChainProblem::translation_invariant(&ModelSpec::heisenberg(1.0), 2).unwrap();
    let cfg = BPConfig::default();
    let (state, f) = solve(&p, 1.0, &cfg).unwrap();
    assert!(state.converged);
    assert!(f.consistency <= 10.0 * cfg.tol);
    let cancelled = BPConfig {
        rule: MessageRule::Cancelled,
        ..cfg
    };
    let (_, g) = solve(&p, 1.0, &cancelled).unwrap();
    assert!(g.consistency > 1e-4);
}

#[test]
fn dual_matches_primal() {
    let cfg = SolverConfig::default();
    let model = ModelSpec::heisenberg(1.0);
    let p = ChainProblem::translation_invariant(&model, 2).unwrap();
    for t in [0.5, 1.5] {
        let (_, f) = solve(&p, t, &BPConfig::default()).unwrap();
        let primal = minimize_ti(LatticeKind::TiChain, &model, &ShieldTemplate::chain(2), t, &cfg).unwrap();
        assert!((f.free_energy - primal.free_energy).abs() < 1e-6, "T = {t}");
    }
    let lm = build_lattice(&LatticeSpec::chain(6, Boundary::Open), &model).unwrap();
    let open = ChainProblem::open_chain(&lm, 2).unwrap();
    let (_, f) = solve(&open, 0.7, &BPConfig::default()).unwrap();
    let primal = minimize_finite(&lm, &Neighborhood::Radius(2), TermAssignment::HighestSite, 0.7, &cfg).unwrap();
    assert!((f.free_energy - primal.free_energy).abs() < 1e-6);
}

#[test]
fn free_spins_converge_at_once() {
    let p = open_problem(ModelSpec::heisenberg(0.0), 5, 2);
    let (state, f) = solve(&p, 2.0, &BPConfig::default()).unwrap();
    assert!(state.converged);
    assert_eq!(state.iterations, 1);
    assert!((f.free_energy + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn iteration_cap_is_reported_not_raised() {
    let p = ChainProblem::translation_invariant(&ModelSpec::heisenberg(1.0), 2).unwrap();
    let cfg = BPConfig {
        max_iterations: 2,
        ..BPConfig::default()
    };
    let state = bp_fixed_point(&p, 0.3, &cfg).unwrap();
    assert!(!state.converged);
    assert_eq!(state.iterations, 2);
    assert!(state.residual > cfg.tol);
    assert!(matches!(bp_fixed_point(&p, 0.0, &cfg), Err(BpError::BadTemperature(_))));
}

#[test]
fn messages_are_unit_trace_states() {
    let p = ChainProblem::translation_invariant(&ModelSpec::tfim(1.0, 0.7), 2).unwrap();
    let (state, _) = solve(&p, 0.6, &BPConfig::default()).unwrap();
    for m in state.to_left.iter().chain(&state.to_right) {
        let op = m.operator().unwrap();
        assert!((op.trace() - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::new(op).is_ok());
    }
}
