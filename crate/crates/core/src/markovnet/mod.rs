//! Quantum Markov chains and trees: conditional-mutual-information certificates, Petz
//! recovery of global states from marginals, and commuting Hamiltonians for classical
//! Markov trees.

use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::opalg::{
    cmi, conditional_entropy, dense, matrix_exp, matrix_log, DensityMatrix, HermitianOperator,
    OpError, SiteSpace, LOG_FLOOR, vn_entropy,
};

/// Largest global dimension handled here.
pub const MAX_GLOBAL_DIM: usize = 1 << 14;
/// Allowed disagreement between marginals on their common sites.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// A step whose conditional mutual information is at most this counts as saturated.
pub const SATURATION_TOL: f64 = 1e-8;
/// Energy standing in for `−ln 0`; `e^{−800}` underflows to zero.
pub const ZERO_PROBABILITY_ENERGY: f64 = 800.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("dimension {dim} exceeds the limit {MAX_GLOBAL_DIM}")]
    TooLarge { dim: usize },
    #[error("marginals disagree on {sites:?} by {deviation:e}")]
    Inconsistent { sites: Vec<usize>, deviation: f64 },
    #[error("state is not diagonal: general quantum splitting is out of scope")]
    NotDiagonal,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Operator(#[from] OpError),
}

/// Rooted tree on nodes `0..n`; node 0 is the root and every parent precedes its children.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeGraph {
    parents: Vec<Option<usize>>,
    dims: Vec<usize>,
}

impl TreeGraph {
    pub fn new(parents: Vec<Option<usize>>, dims: Vec<usize>) -> Result<Self, MarkovError> {
        if parents.is_empty() {
            return Err(MarkovError::InvalidTree("no nodes".into()));
        }
        if parents.len() != dims.len() {
            return Err(MarkovError::InvalidTree(format!(
                "{} parents for {} dimensions",
                parents.len(),
                dims.len()
            )));
        }
        if parents[0].is_some() {
            return Err(MarkovError::InvalidTree("node 0 must be the root".into()));
        }
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < i => {}
                Some(p) => {
                    return Err(MarkovError::InvalidTree(format!(
                        "node {i} has parent {p}, which does not precede it"
                    )))
                }
                None => return Err(MarkovError::InvalidTree(format!("node {i} has no parent"))),
            }
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(MarkovError::InvalidTree(format!("node dimension {d} is below 2")));
        }
        Ok(Self { parents, dims })
    }

    /// `0 − 1 − … − (n−1)` with qubit nodes.
    pub fn path(n: usize) -> Self {
        let parents = (0..n).map(|i| i.checked_sub(1)).collect();
        Self::new(parents, vec![2; n]).expect("path is a tree")
    }

    /// Root 0 with qubit leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        let parents = std::iter::once(None).chain((0..leaves).map(|_| Some(0))).collect();
        Self::new(parents, vec![2; leaves + 1]).expect("star is a tree")
    }

    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| self.parents[k] == Some(i)).collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn space(&self) -> SiteSpace {
        SiteSpace::new((0..self.n_nodes()).collect(), self.dims.clone()).expect("distinct labels")
    }

    /// Markov shields in node order: the parent, or nothing for the root.
    pub fn shields(&self) -> Vec<Vec<usize>> {
        self.parents.iter().map(|p| p.iter().copied().collect()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CmiProfile {
    /// `I({<k} ∖ M_k; k | M_k)` per step.
    pub cmi: Vec<f64>,
    /// `S(k|M_k) − S(k|{<k})` per step; equal to `cmi` up to rounding.
    pub gaps: Vec<f64>,
    pub saturated: Vec<bool>,
}

impl CmiProfile {
    pub fn all_saturated(&self) -> bool {
        self.saturated.iter().all(|&s| s)
    }

    pub fn max_cmi(&self) -> f64 {
        self.cmi.iter().copied().fold(0.0, f64::max)
    }
}

fn guard(dim: usize) -> Result<(), MarkovError> {
    if dim > MAX_GLOBAL_DIM {
        return Err(MarkovError::TooLarge { dim });
    }
    Ok(())
}

fn check_shields(ordering: &[usize], shields: &[Vec<usize>]) -> Result<(), MarkovError> {
    if ordering.len() != shields.len() {
        return Err(MarkovError::InvalidInput(format!(
            "{} shields for {} sites",
            shields.len(),
            ordering.len()
        )));
    }
    for (pos, shield) in shields.iter().enumerate() {
        for s in shield {
            if !ordering[..pos].contains(s) {
                return Err(MarkovError::InvalidInput(format!(
                    "shield site {s} of site {} does not precede it",
                    ordering[pos]
                )));
            }
        }
    }
    Ok(())
}

/// Per-step conditional mutual information of `ρ` along `ordering`, with `shields[i]` the
/// shield of `ordering[i]`.
pub fn cmi_profile(
    rho: &DensityMatrix,
    ordering: &[usize],
    shields: &[Vec<usize>],
) -> Result<CmiProfile, MarkovError> {
    guard(rho.dim())?;
    check_shields(ordering, shields)?;
    let mut profile = CmiProfile {
        cmi: Vec::new(),
        gaps: Vec::new(),
        saturated: Vec::new(),
    };
    for (pos, (&k, shield)) in ordering.iter().zip(shields).enumerate() {
        let before = &ordering[..pos];
        let rest: Vec<usize> = before.iter().copied().filter(|s| !shield.contains(s)).collect();
        let (value, gap) = if rest.is_empty() {
            (0.0, 0.0)
        } else {
            let mut upto: Vec<usize> = before.to_vec();
            upto.push(k);
            let marginal = rho.partial_trace(&upto)?;
            let value = cmi(&marginal, &rest, shield, &[k])?;
            let mut local = shield.clone();
            local.push(k);
            let s_local = if shield.is_empty() {
                vn_entropy(&marginal.partial_trace(&[k])?)
            } else {
                conditional_entropy(&marginal.partial_trace(&local)?, &[k])?
            };
            let s_all = conditional_entropy(&marginal, &[k])?;
            (value, s_local - s_all)
        };
        profile.cmi.push(value);
        profile.gaps.push(gap);
        profile.saturated.push(value <= SATURATION_TOL);
    }
    Ok(profile)
}

fn spectral(op: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator, OpError> {
    let m = op.eigh()?.apply(f);
    HermitianOperator::new(op.space().clone(), dense::hermitian_part(m.as_ref()))
}

fn inverse_sqrt(x: f64) -> f64 {
    if x > 1e-14 {
        1.0 / x.sqrt()
    } else {
        0.0
    }
}

fn check_consistent(a: &DensityMatrix, b: &DensityMatrix) -> Result<(), MarkovError> {
    let sites = b.space().labels().to_vec();
    let reduced = a.partial_trace(&sites)?;
    let deviation = dense::max_abs((reduced.matrix() - b.matrix()).as_ref());
    if deviation > CONSISTENCY_TOL {
        return Err(MarkovError::Inconsistent { sites, deviation });
    }
    Ok(())
}

fn renormalize(op: HermitianOperator) -> Result<DensityMatrix, MarkovError> {
    let trace = op.trace();
    if !(trace > 0.0) {
        return Err(OpError::ZeroOperator.into());
    }
    Ok(DensityMatrix::from_raw(op.scale(1.0 / trace)))
}

/// Petz recovery `ρ_BC^{1/2} ρ_B^{−1/2} ρ_AB ρ_B^{−1/2} ρ_BC^{1/2}` on `A ∪ B ∪ C`,
/// renormalized; `B` is the site set of `rho_b`.
///
/// The result's sites are ordered as `rho_ab` followed by the sites of `C`.
pub fn petz_step(
    rho_ab: &DensityMatrix,
    rho_b: &DensityMatrix,
    rho_bc: &DensityMatrix,
) -> Result<DensityMatrix, MarkovError> {
    let b = rho_b.space();
    if !b.labels().iter().all(|l| rho_ab.space().contains(*l) && rho_bc.space().contains(*l)) {
        return Err(MarkovError::InvalidInput(
            "the conditioning sites must lie in both marginals".into(),
        ));
    }
    let c: Vec<usize> = rho_bc.space().complement(b.labels());
    if c.iter().any(|l| rho_ab.space().contains(*l)) {
        return Err(MarkovError::InvalidInput("A and C overlap".into()));
    }
    if !b.is_empty() {
        check_consistent(rho_ab, rho_b)?;
        check_consistent(rho_bc, rho_b)?;
    }
    let joint = rho_ab.space().union(rho_bc.space())?;
    guard(joint.dim())?;

    let sqrt_bc = spectral(rho_bc.as_operator(), |x| x.max(0.0).sqrt())?.embed(&joint)?;
    let ab = rho_ab.as_operator().embed(&joint)?;
    let middle = if b.is_empty() {
        ab.matrix().to_owned()
    } else {
        let inv_b = spectral(rho_b.as_operator(), inverse_sqrt)?.embed(&joint)?;
        inv_b.matrix() * ab.matrix() * inv_b.matrix()
    };
    let m: Mat<faer::c64> = sqrt_bc.matrix() * middle * sqrt_bc.matrix();
    renormalize(HermitianOperator::new(joint, dense::hermitian_part(m.as_ref()))?)
}

/// `exp(log ρ_AB + log ρ_BC − log ρ_B)` and its trace before renormalization.
fn log_step(
    rho_ab: &DensityMatrix,
    rho_b: &DensityMatrix,
    rho_bc: &DensityMatrix,
) -> Result<(DensityMatrix, f64), MarkovError> {
    let joint = rho_ab.space().union(rho_bc.space())?;
    guard(joint.dim())?;
    let mut g = matrix_log(rho_ab.as_operator(), LOG_FLOOR)?.embed(&joint)?;
    g = g.add_scaled(&matrix_log(rho_bc.as_operator(), LOG_FLOOR)?.embed(&joint)?, 1.0)?;
    if !rho_b.space().is_empty() {
        g = g.add_scaled(&matrix_log(rho_b.as_operator(), LOG_FLOOR)?.embed(&joint)?, -1.0)?;
    }
    let e = matrix_exp(&g)?;
    let trace = e.trace();
    Ok((renormalize(e)?, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionMethod {
    Petz,
    /// `log ρ_{<k+1} = log ρ_{<k} + log ρ_{k∪M_k} − log ρ_{M_k}`; a cross-check only.
    AdditiveLog,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    #[serde(skip)]
    pub state: DensityMatrix,
    pub method: ReconstructionMethod,
    /// Trace distance to the reference state, when one was given.
    pub trace_distance: Option<f64>,
    /// `I({<k} ∖ M_k; k | M_k)` of the reference per step, when one was given.
    pub reference_cmi: Option<Vec<f64>>,
    /// For the log method, `Tr exp(…)` per step before renormalization.
    pub unnormalized_traces: Vec<f64>,
}

/// Marginals on `{k} ∪ M_k` in the order of `ordering`, for feeding [`chain_reconstruct`].
pub fn chain_marginals(
    rho: &DensityMatrix,
    ordering: &[usize],
    shields: &[Vec<usize>],
) -> Result<Vec<DensityMatrix>, MarkovError> {
    check_shields(ordering, shields)?;
    ordering
        .iter()
        .zip(shields)
        .map(|(&k, shield)| {
            let mut sites = shield.clone();
            sites.push(k);
            Ok(rho.partial_trace(&sites)?)
        })
        .collect()
}

/// Rebuilds a global state site by site from the marginals on `{k} ∪ M_k`.
///
/// `marginals[i]` lives on `shields[i] ∪ {ordering[i]}`. The result is ordered as
/// `ordering`; it is compared with `reference` when one is given.
pub fn chain_reconstruct(
    marginals: &[DensityMatrix],
    ordering: &[usize],
    shields: &[Vec<usize>],
    method: ReconstructionMethod,
    reference: Option<&DensityMatrix>,
) -> Result<ReconstructionReport, MarkovError> {
    check_shields(ordering, shields)?;
    if marginals.len() != ordering.len() || ordering.is_empty() {
        return Err(MarkovError::InvalidInput(format!(
            "{} marginals for {} sites",
            marginals.len(),
            ordering.len()
        )));
    }
    for (i, (m, shield)) in marginals.iter().zip(shields).enumerate() {
        let expected = shield.len() + 1;
        if m.space().len() != expected
            || !m.space().contains(ordering[i])
            || !shield.iter().all(|s| m.space().contains(*s))
        {
            return Err(MarkovError::InvalidInput(format!(
                "marginal {i} must live on site {} and its shield",
                ordering[i]
            )));
        }
    }
    // the inputs must agree wherever they overlap; the log form does not preserve
    // marginals, so the running state cannot be checked instead
    for (i, a) in marginals.iter().enumerate() {
        for b in &marginals[i + 1..] {
            let overlap: Vec<usize> = a
                .space()
                .labels()
                .iter()
                .copied()
                .filter(|l| b.space().contains(*l))
                .collect();
            if !overlap.is_empty() {
                check_consistent(a, &b.partial_trace(&overlap)?)?;
            }
        }
    }
    let mut state = marginals[0].clone();
    let mut traces = Vec::new();
    for (i, (m, shield)) in marginals.iter().zip(shields).enumerate().skip(1) {
        let rho_b = m.partial_trace(shield)?;
        state = match method {
            ReconstructionMethod::Petz => petz_step(&state, &rho_b, m)?,
            ReconstructionMethod::AdditiveLog => {
                let (s, tr) = log_step(&state, &rho_b, m)?;
                traces.push(tr);
                s
            }
        };
        let upto: Vec<usize> = ordering[..=i].to_vec();
        state = state.reordered(&upto)?;
    }
    let (trace_distance, reference_cmi) = match reference {
        Some(r) => {
            let marginal = r.partial_trace(ordering)?;
            let d = state.trace_distance(&marginal)?;
            (Some(d), Some(cmi_profile(&marginal, ordering, shields)?.cmi))
        }
        None => (None, None),
    };
    Ok(ReconstructionReport {
        state,
        method,
        trace_distance,
        reference_cmi,
        unnormalized_traces: traces,
    })
}

/// Rebuilds a state on a tree from the marginals on each edge `(parent(k), k)`,
/// `edge_marginals[k − 1]` for `k = 1..n`. Nodes are added in order, each conditioned
/// on its parent alone.
pub fn tree_reconstruct(
    tree: &TreeGraph,
    edge_marginals: &[DensityMatrix],
    reference: Option<&DensityMatrix>,
) -> Result<ReconstructionReport, MarkovError> {
    let n = tree.n_nodes();
    if n == 1 {
        return Err(MarkovError::InvalidInput("a single node has no edges".into()));
    }
    if edge_marginals.len() != n - 1 {
        return Err(MarkovError::InvalidInput(format!(
            "{} edge marginals for {} edges",
            edge_marginals.len(),
            n - 1
        )));
    }
    let root = edge_marginals[0].partial_trace(&[0])?;
    let mut marginals = vec![root];
    marginals.extend(edge_marginals.iter().cloned());
    let ordering: Vec<usize> = (0..n).collect();
    chain_reconstruct(&marginals, &ordering, &tree.shields(), ReconstructionMethod::Petz, reference)
}

/// Node values of configuration `index`, node 0 most significant.
fn decode(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = index % dims[i];
        index /= dims[i];
    }
    out
}

fn diagonal_of(rho: &DensityMatrix) -> Result<Vec<f64>, MarkovError> {
    let m = rho.matrix();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 1e-12 {
                return Err(MarkovError::NotDiagonal);
            }
        }
    }
    Ok((0..n).map(|i| m[(i, i)].re).collect())
}

/// Single-node and parent-child marginals of a classical distribution on a tree.
struct TreeMarginals {
    node: Vec<Vec<f64>>,
    /// `edge[k][i * d_k + j] = q(x_p = i, x_k = j)`.
    edge: Vec<Vec<f64>>,
}

fn tree_marginals(p: &[f64], tree: &TreeGraph) -> TreeMarginals {
    let dims = tree.dims();
    let mut node: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    let mut edge: Vec<Vec<f64>> = (0..tree.n_nodes())
        .map(|k| match tree.parent(k) {
            Some(pk) => vec![0.0; dims[pk] * dims[k]],
            None => Vec::new(),
        })
        .collect();
    for (idx, &w) in p.iter().enumerate() {
        let x = decode(idx, dims);
        for k in 0..tree.n_nodes() {
            node[k][x[k]] += w;
            if let Some(pk) = tree.parent(k) {
                edge[k][x[pk] * dims[k] + x[k]] += w;
            }
        }
    }
    TreeMarginals { node, edge }
}

/// `q(x_0) Π_k q(x_k | x_p(k))` at configuration `x`; conditionals on zero-probability
/// parents are taken to be zero.
fn tree_probability(x: &[usize], tree: &TreeGraph, m: &TreeMarginals) -> f64 {
    let mut q = m.node[0][x[0]];
    for k in 1..tree.n_nodes() {
        let pk = tree.parent(k).expect("non-root has a parent");
        let parent = m.node[pk][x[pk]];
        if parent <= 0.0 {
            return 0.0;
        }
        q *= m.edge[k][x[pk] * tree.dims()[k] + x[k]] / parent;
    }
    q
}

fn check_distribution(p: &[f64], tree: &TreeGraph) -> Result<(), MarkovError> {
    let dim: usize = tree.dims().iter().product();
    guard(dim)?;
    if p.len() != dim {
        return Err(MarkovError::InvalidInput(format!(
            "distribution has {} entries, the tree needs {dim}",
            p.len()
        )));
    }
    if p.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return Err(MarkovError::InvalidInput("negative or non-finite probability".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(MarkovError::InvalidInput(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// One commuting term of a classical tree Hamiltonian.
#[derive(Clone, Debug)]
pub struct TreeTerm {
    /// `[k]` for the root, `[p(k), k]` otherwise.
    pub nodes: Vec<usize>,
    pub operator: HermitianOperator,
}

#[derive(Clone, Debug)]
pub struct TreeHamiltonian {
    pub terms: Vec<TreeTerm>,
    /// Largest Frobenius norm of `[H_j, H_k]` over all pairs.
    pub max_commutator: f64,
    /// `Tr exp(−Σ H_k)`; one for an exact construction.
    pub partition_function: f64,
    /// `‖exp(−Σ H_k) − ρ‖₁`.
    pub residual: f64,
    /// `‖exp(−Σ H_k)/Z − ρ‖₁`.
    pub normalized_residual: f64,
    pub verified: bool,
    /// Entries of `ρ` that are exactly zero.
    pub zero_entries: usize,
}

impl TreeHamiltonian {
    pub fn total(&self, space: &SiteSpace) -> Result<HermitianOperator, OpError> {
        crate::opalg::sum_local_terms(space, self.terms.iter().map(|t| (&t.operator, 1.0)))
    }
}

fn neg_log(q: f64) -> f64 {
    if q > 0.0 {
        -q.ln()
    } else {
        ZERO_PROBABILITY_ENERGY
    }
}

/// Commuting terms `H_0 = −Σ_j P_0(j) ln q_0(j)` and
/// `H_k = −Σ_{i,j} P_k(j) P_{p(k)}(i) ln q_k(j|i)` for a state diagonal in the product basis.
///
/// The construction is exact exactly when the distribution is Markov on the tree;
/// otherwise the report comes back with `verified = false`.
pub fn classical_tree_hamiltonian(rho: &DensityMatrix, tree: &TreeGraph) -> Result<TreeHamiltonian, MarkovError> {
    let space = tree.space();
    if rho.space() != &space {
        return Err(MarkovError::InvalidInput(format!(
            "state lives on {:?}, the tree on {:?}",
            rho.space().labels(),
            space.labels()
        )));
    }
    let p = diagonal_of(rho)?;
    check_distribution(&p, tree)?;
    let m = tree_marginals(&p, tree);
    let dims = tree.dims();

    let mut terms = Vec::with_capacity(tree.n_nodes());
    let root: Vec<f64> = m.node[0].iter().map(|&q| neg_log(q)).collect();
    terms.push(TreeTerm {
        nodes: vec![0],
        operator: HermitianOperator::from_diagonal(space.subspace(&[0])?, &root)?,
    });
    for k in 1..tree.n_nodes() {
        let pk = tree.parent(k).expect("non-root has a parent");
        let mut diag = Vec::with_capacity(dims[pk] * dims[k]);
        for i in 0..dims[pk] {
            for j in 0..dims[k] {
                let parent = m.node[pk][i];
                // a zero-probability parent block is pruned; its conditional is arbitrary
                diag.push(if parent > 0.0 {
                    neg_log(m.edge[k][i * dims[k] + j] / parent)
                } else {
                    0.0
                });
            }
        }
        terms.push(TreeTerm {
            nodes: vec![pk, k],
            operator: HermitianOperator::from_diagonal(space.subspace(&[pk, k])?, &diag)?,
        });
    }

    let embedded: Vec<HermitianOperator> = terms
        .iter()
        .map(|t| t.operator.embed(&space))
        .collect::<Result<_, _>>()?;
    let mut max_commutator: f64 = 0.0;
    for a in 0..embedded.len() {
        for b in a + 1..embedded.len() {
            let (x, y) = (embedded[a].matrix(), embedded[b].matrix());
            let c = x * y - y * x;
            max_commutator = max_commutator.max(dense::frobenius(c.as_ref()));
        }
    }

    let mut energy = vec![0.0; p.len()];
    for h in &embedded {
        let d = h.matrix();
        for (i, e) in energy.iter_mut().enumerate() {
            *e += d[(i, i)].re;
        }
    }
    let weights: Vec<f64> = energy.iter().map(|e| (-e).exp()).collect();
    let z: f64 = weights.iter().sum();
    let residual: f64 = weights.iter().zip(&p).map(|(w, q)| (w - q).abs()).sum();
    let normalized_residual: f64 = weights.iter().zip(&p).map(|(w, q)| (w / z - q).abs()).sum();
    Ok(TreeHamiltonian {
        terms,
        max_commutator,
        partition_function: z,
        residual,
        normalized_residual,
        verified: max_commutator == 0.0 && residual <= 1e-8,
        zero_entries: p.iter().filter(|&&q| q == 0.0).count(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    /// `‖p − q‖₁` against the best tree factorization `q = q(x_0) Π q(x_k|x_p)`.
    pub residual: f64,
    pub factorizes: bool,
    pub zero_entries: usize,
    pub note: Option<String>,
}

/// Checks whether `p` (node 0 most significant) is a product of edge potentials on the tree.
///
/// The potentials are fitted from the exact node and edge marginals; on a tree these are
/// the fixed point of sum-product message passing.
pub fn hammersley_clifford_verify(p: &[f64], tree: &TreeGraph) -> Result<FactorizationReport, MarkovError> {
    check_distribution(p, tree)?;
    let m = tree_marginals(p, tree);
    let residual: f64 = p
        .iter()
        .enumerate()
        .map(|(idx, &w)| (w - tree_probability(&decode(idx, tree.dims()), tree, &m)).abs())
        .sum();
    let zero_entries = p.iter().filter(|&&q| q == 0.0).count();
    Ok(FactorizationReport {
        residual,
        factorizes: residual <= 1e-10,
        zero_entries,
        note: (zero_entries > 0).then(|| {
            format!("{zero_entries} zero-probability entries; conditionals on empty blocks set to zero")
        }),
    })
}
