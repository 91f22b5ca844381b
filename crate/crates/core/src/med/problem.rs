use faer::{c64, Mat};
use serde::Serialize;

use super::MedError;
use crate::lattice::{
    assign_terms, markov_shields, ti_cluster, LatticeKind, LatticeModel, ModelSpec, Neighborhood,
    ShieldTemplate, TermAssignment,
};
use crate::opalg::{
    dense, entropy_of_eigenvalues, DensityMatrix, HermitianOperator, SiteSpace, Spectrum, Split,
    LOG_FLOOR,
};

/// Largest cluster dimension the solver accepts.
pub const MAX_CLUSTER_DIM: usize = 1 << 12;

/// One conditional entropy `S(C|M)` evaluated on a marginal of a variable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyTerm {
    pub variable: usize,
    /// Sites of `C`, a subset of the variable's sites.
    pub cluster: Vec<usize>,
    /// Sites of `M ⊂ C`.
    pub shield: Vec<usize>,
    pub weight: f64,
}

/// The marginal of `left.0` on sites `left.1` must equal the marginal of
/// `right.0` on sites `right.1`, site lists matched position by position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub left: (usize, Vec<usize>),
    pub right: (usize, Vec<usize>),
}

/// A Markov free-energy minimization problem over locally consistent cluster states.
///
/// Every patch is one Markov entropy (a list of conditional entropies); with several
/// patches the solver minimizes the largest patch free energy.
#[derive(Clone, Debug)]
pub struct MarkovProblem {
    variables: Vec<SiteSpace>,
    hamiltonians: Vec<HermitianOperator>,
    patches: Vec<Vec<EntropyTerm>>,
    constraints: Vec<Constraint>,
    sites_per_unit: f64,
    shield_description: Vec<String>,
}

impl MarkovProblem {
    pub fn new(
        variables: Vec<SiteSpace>,
        hamiltonians: Vec<HermitianOperator>,
        patches: Vec<Vec<EntropyTerm>>,
        constraints: Vec<Constraint>,
        sites_per_unit: f64,
    ) -> Result<Self, MedError> {
        let bad = |m: String| Err(MedError::InvalidProblem(m));
        if variables.is_empty() {
            return bad("no variables".into());
        }
        if hamiltonians.len() != variables.len() {
            return bad("one Hamiltonian per variable required".into());
        }
        if patches.is_empty() {
            return bad("at least one entropy patch required".into());
        }
        if !(sites_per_unit > 0.0) {
            return bad("site count must be positive".into());
        }
        for (v, space) in variables.iter().enumerate() {
            if space.dim() > MAX_CLUSTER_DIM {
                return Err(MedError::TooLarge { dim: space.dim() });
            }
            if !hamiltonians[v].space().same_sites(space) {
                return bad(format!("Hamiltonian {v} does not live on its variable"));
            }
        }
        let subset = |v: usize, sites: &[usize]| -> bool {
            v < variables.len() && sites.iter().all(|s| variables[v].contains(*s))
        };
        for term in patches.iter().flatten() {
            if !subset(term.variable, &term.cluster)
                || term.shield.iter().any(|s| !term.cluster.contains(s))
                || term.shield.len() >= term.cluster.len()
            {
                return Err(MedError::ShieldMismatch(format!(
                    "cluster {:?} / shield {:?} on variable {}",
                    term.cluster, term.shield, term.variable
                )));
            }
        }
        for c in &constraints {
            if !subset(c.left.0, &c.left.1)
                || !subset(c.right.0, &c.right.1)
                || c.left.1.len() != c.right.1.len()
                || c.left.1.is_empty()
            {
                return bad(format!("malformed constraint {c:?}"));
            }
            let da: Vec<usize> = c.left.1.iter().map(|&s| variables[c.left.0].dim_of(s).unwrap()).collect();
            let db: Vec<usize> = c.right.1.iter().map(|&s| variables[c.right.0].dim_of(s).unwrap()).collect();
            if da != db {
                return bad(format!("constraint {c:?} pairs sites of different dimension"));
            }
        }
        Ok(Self {
            variables,
            hamiltonians,
            patches,
            constraints,
            sites_per_unit,
            shield_description: Vec::new(),
        })
    }

    /// Single-cluster problem for an infinite lattice with one shield template.
    pub fn translation_invariant(
        kind: LatticeKind,
        model: &ModelSpec,
        template: &ShieldTemplate,
    ) -> Result<Self, MedError> {
        Self::translation_invariant_patches(kind, model, std::slice::from_ref(template))
    }

    /// Translation-invariant problem with one patch per template; the variable is the
    /// cluster spanned by the union of all templates.
    pub fn translation_invariant_patches(
        kind: LatticeKind,
        model: &ModelSpec,
        templates: &[ShieldTemplate],
    ) -> Result<Self, MedError> {
        if templates.is_empty() {
            return Err(MedError::InvalidProblem("no shield templates".into()));
        }
        let mut union: Vec<(i64, i64)> = Vec::new();
        for t in templates {
            for o in t.offsets() {
                if !union.contains(o) {
                    union.push(*o);
                }
            }
        }
        let cluster = ti_cluster(kind, model, &ShieldTemplate::new(union.clone())?)?;
        if cluster.space().dim() > MAX_CLUSTER_DIM {
            return Err(MedError::TooLarge { dim: cluster.space().dim() });
        }
        let patches = templates
            .iter()
            .map(|t| {
                let shield: Vec<usize> = t
                    .offsets()
                    .iter()
                    .map(|o| 1 + union.iter().position(|u| u == o).unwrap())
                    .collect();
                let mut c = vec![0];
                c.extend_from_slice(&shield);
                vec![EntropyTerm {
                    variable: 0,
                    cluster: c,
                    shield,
                    weight: 1.0,
                }]
            })
            .collect();
        let constraints = cluster
            .constraints
            .iter()
            .map(|(a, b)| Constraint {
                left: (0, a.clone()),
                right: (0, b.clone()),
            })
            .collect();
        let mut p = Self::new(
            vec![cluster.space()],
            vec![cluster.hamiltonian.clone()],
            patches,
            constraints,
            1.0,
        )?;
        p.shield_description = templates.iter().map(ShieldTemplate::render).collect();
        Ok(p)
    }

    /// Finite-lattice problem: one variable per maximal cluster, consistency on every
    /// pairwise overlap. Terms are assigned with the first neighborhood's shields.
    pub fn finite(
        lm: &LatticeModel,
        neighborhoods: &[Neighborhood],
        mode: TermAssignment,
    ) -> Result<Self, MedError> {
        if neighborhoods.is_empty() {
            return Err(MedError::InvalidProblem("no neighborhoods".into()));
        }
        let shield_sets = neighborhoods
            .iter()
            .map(|nb| markov_shields(&lm.lattice, &lm.ordering, nb))
            .collect::<Result<Vec<_>, _>>()?;

        let sorted = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v
        };
        let mut clusters: Vec<Vec<usize>> = shield_sets
            .iter()
            .flatten()
            .map(|s| sorted(&s.cluster))
            .collect();
        clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        clusters.dedup();
        let mut maximal: Vec<Vec<usize>> = Vec::new();
        for c in clusters {
            if !maximal.iter().any(|m| c.iter().all(|s| m.contains(s))) {
                maximal.push(c);
            }
        }
        // keep variables in the order of their earliest shield for readable output
        let first_use = |m: &Vec<usize>| {
            shield_sets[0]
                .iter()
                .position(|s| s.cluster.iter().all(|x| m.contains(x)))
                .unwrap_or(usize::MAX)
        };
        maximal.sort_by_key(first_use);
        let host = |cluster: &[usize]| {
            maximal
                .iter()
                .position(|m| cluster.iter().all(|s| m.contains(s)))
                .expect("every cluster lies in a maximal cluster")
        };

        let variables: Vec<SiteSpace> = maximal.iter().map(|m| SiteSpace::qubits(m.iter().copied())).collect();
        for v in &variables {
            if v.dim() > MAX_CLUSTER_DIM {
                return Err(MedError::TooLarge { dim: v.dim() });
            }
        }
        let mut hamiltonians: Vec<HermitianOperator> =
            variables.iter().map(|v| HermitianOperator::zeros(v.clone())).collect();
        let assignment = assign_terms(&shield_sets[0], &lm.terms, mode)?;
        for (shield, assigned) in shield_sets[0].iter().zip(&assignment) {
            let v = host(&shield.cluster);
            for &(t, w) in assigned {
                hamiltonians[v] = hamiltonians[v].add_scaled(&lm.terms[t].operator, w)?;
            }
        }
        let patches = shield_sets
            .iter()
            .map(|shields| {
                shields
                    .iter()
                    .map(|s| EntropyTerm {
                        variable: host(&s.cluster),
                        cluster: s.cluster.clone(),
                        shield: s.shield.clone(),
                        weight: 1.0,
                    })
                    .collect()
            })
            .collect();
        let mut constraints = Vec::new();
        for i in 0..maximal.len() {
            for j in i + 1..maximal.len() {
                let overlap: Vec<usize> = maximal[i].iter().copied().filter(|s| maximal[j].contains(s)).collect();
                if !overlap.is_empty() {
                    constraints.push(Constraint {
                        left: (i, overlap.clone()),
                        right: (j, overlap),
                    });
                }
            }
        }
        let mut p = Self::new(
            variables,
            hamiltonians,
            patches,
            constraints,
            lm.lattice.n_sites() as f64,
        )?;
        p.shield_description = shield_sets
            .iter()
            .map(|shields| {
                let parts: Vec<String> = shields.iter().map(|s| format!("{}:{:?}", s.site, s.shield)).collect();
                parts.join(" ")
            })
            .collect();
        Ok(p)
    }

    pub fn variables(&self) -> &[SiteSpace] {
        &self.variables
    }

    pub fn hamiltonians(&self) -> &[HermitianOperator] {
        &self.hamiltonians
    }

    pub fn patches(&self) -> &[Vec<EntropyTerm>] {
        &self.patches
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Number of lattice sites the objective is summed over (1 in translation-invariant mode).
    pub fn sites_per_unit(&self) -> f64 {
        self.sites_per_unit
    }

    /// Human-readable shield shapes, one entry per patch.
    pub fn shield_description(&self) -> &[String] {
        &self.shield_description
    }

    pub fn with_shield_description(mut self, description: Vec<String>) -> Self {
        self.shield_description = description;
        self
    }

    /// Replaces the patch list (e.g. to weight or drop entropy terms).
    pub fn with_patches(self, patches: Vec<Vec<EntropyTerm>>) -> Result<Self, MedError> {
        let desc = self.shield_description.clone();
        Ok(Self::new(
            self.variables,
            self.hamiltonians,
            patches,
            self.constraints,
            self.sites_per_unit,
        )?
        .with_shield_description(desc))
    }

    pub(crate) fn compile(&self) -> Result<Compiled, MedError> {
        let mut entropy = Vec::new();
        for (p, patch) in self.patches.iter().enumerate() {
            for term in patch {
                let space = &self.variables[term.variable];
                let whole = term.cluster.len() == space.len();
                entropy.push(CompiledTerm {
                    patch: p,
                    variable: term.variable,
                    weight: term.weight,
                    cluster: (!whole).then(|| Split::new(space, &term.cluster)).transpose()?,
                    shield: (!term.shield.is_empty())
                        .then(|| Split::new(space, &term.shield))
                        .transpose()?,
                });
            }
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok((
                    c.left.0,
                    Split::new(&self.variables[c.left.0], &c.left.1)?,
                    c.right.0,
                    Split::new(&self.variables[c.right.0], &c.right.1)?,
                ))
            })
            .collect::<Result<Vec<_>, MedError>>()?;
        Ok(Compiled {
            entropy,
            constraints,
            n_patches: self.patches.len(),
        })
    }
}

pub(crate) struct CompiledTerm {
    pub patch: usize,
    pub variable: usize,
    pub weight: f64,
    /// `None` when the cluster is the whole variable.
    pub cluster: Option<Split>,
    pub shield: Option<Split>,
}

pub(crate) struct Compiled {
    pub entropy: Vec<CompiledTerm>,
    pub constraints: Vec<(usize, Split, usize, Split)>,
    pub n_patches: usize,
}

/// Cluster states `{ρ_X}`, one per problem variable.
#[derive(Clone, Debug)]
pub struct ClusterVariables {
    states: Vec<DensityMatrix>,
}

impl ClusterVariables {
    pub fn new(problem: &MarkovProblem, states: Vec<DensityMatrix>) -> Result<Self, MedError> {
        if states.len() != problem.variables.len()
            || states.iter().zip(&problem.variables).any(|(s, v)| !s.space().same_sites(v))
        {
            return Err(MedError::ShieldMismatch(
                "states do not match the problem variables".into(),
            ));
        }
        let states = states
            .into_iter()
            .zip(&problem.variables)
            .map(|(s, v)| s.reordered(v.labels()))
            .collect::<Result<_, _>>()?;
        Ok(Self { states })
    }

    pub(crate) fn from_states_unchecked(states: Vec<DensityMatrix>) -> Self {
        Self { states }
    }

    /// Marginals of a global state on every variable.
    pub fn from_global(problem: &MarkovProblem, rho: &DensityMatrix) -> Result<Self, MedError> {
        let states = problem
            .variables
            .iter()
            .map(|v| rho.partial_trace(v.labels()))
            .collect::<Result<_, _>>()?;
        Ok(Self { states })
    }

    pub fn maximally_mixed(problem: &MarkovProblem) -> Self {
        Self {
            states: problem
                .variables
                .iter()
                .map(|v| DensityMatrix::maximally_mixed(v.clone()))
                .collect(),
        }
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &ClusterVariables, lambda: f64) -> Result<Self, MedError> {
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| {
                let op = a.as_operator().scale(lambda).add_scaled(b.as_operator(), 1.0 - lambda)?;
                DensityMatrix::new(op)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { states })
    }
}

/// Energy, Markov entropies and free energies of a set of cluster states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeEnergyParts {
    pub temperature: f64,
    /// Total over the sites the problem covers.
    pub energy: f64,
    /// Markov entropy of each patch.
    pub markov_entropy: Vec<f64>,
    /// `E − T·S_M` per patch.
    pub free_energy: Vec<f64>,
    /// Largest absolute entry of any constraint violation.
    pub residual: f64,
}

impl FreeEnergyParts {
    /// Largest patch free energy.
    pub fn max_free_energy(&self) -> f64 {
        self.free_energy.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn log_and_entropy(m: &Mat<c64>) -> (Mat<c64>, f64) {
    let s = Spectrum::of_hermitian(m.as_ref());
    let floor: Vec<f64> = s.values().iter().map(|&x| x.max(LOG_FLOOR).ln()).collect();
    let clipped: Vec<f64> = s.values().iter().map(|&x| x.max(0.0)).collect();
    (
        dense::conjugate_diagonal(s.vectors(), &floor),
        entropy_of_eigenvalues(&clipped),
    )
}

/// `E − T·S_M` for every patch, with `S(k|M_k) = S(ρ_C) − S(ρ_M)` taken from marginals
/// of the variables. `T = 0` gives the plain energy.
pub fn markov_free_energy(
    problem: &MarkovProblem,
    vars: &ClusterVariables,
    t: f64,
) -> Result<FreeEnergyParts, MedError> {
    let compiled = problem.compile()?;
    if vars.states.len() != problem.variables.len() {
        return Err(MedError::ShieldMismatch("wrong number of cluster states".into()));
    }
    let energy: f64 = vars
        .states
        .iter()
        .zip(&problem.hamiltonians)
        .map(|(r, h)| dense::trace_product(r.matrix(), h.matrix()))
        .sum();
    let mut entropy = vec![0.0; compiled.n_patches];
    for term in &compiled.entropy {
        let rho = vars.states[term.variable].matrix();
        let sc = match &term.cluster {
            Some(split) => log_and_entropy(&split.trace_out(rho)).1,
            None => log_and_entropy(&rho.to_owned()).1,
        };
        let sm = match &term.shield {
            Some(split) => log_and_entropy(&split.trace_out(rho)).1,
            None => 0.0,
        };
        entropy[term.patch] += term.weight * (sc - sm);
    }
    let mut residual: f64 = 0.0;
    for (a, sa, b, sb) in &compiled.constraints {
        let c = sa.trace_out(vars.states[*a].matrix()) - sb.trace_out(vars.states[*b].matrix());
        residual = residual.max(dense::max_abs(c.as_ref()));
    }
    Ok(FreeEnergyParts {
        temperature: t,
        energy,
        free_energy: entropy.iter().map(|s| energy - t * s).collect(),
        markov_entropy: entropy,
        residual,
    })
}

/// Euclidean gradient `∂F/∂ρ_X` of one patch's free energy:
/// `Ĥ_X + T Σ (embed ln ρ_C − embed ln ρ_M)` over that patch's terms on `X`.
///
/// Multiples of the identity (from `d Tr ρ ln ρ = Tr (ln ρ + I) dρ`) are dropped; they
/// vanish on trace-preserving directions.
pub fn free_energy_gradient(
    problem: &MarkovProblem,
    vars: &ClusterVariables,
    t: f64,
    patch: usize,
) -> Result<Vec<HermitianOperator>, MedError> {
    if patch >= problem.patches.len() {
        return Err(MedError::InvalidProblem(format!("no patch {patch}")));
    }
    let compiled = problem.compile()?;
    let mut grads: Vec<Mat<c64>> = problem.hamiltonians.iter().map(|h| h.matrix().to_owned()).collect();
    if t != 0.0 {
        for term in compiled.entropy.iter().filter(|x| x.patch == patch) {
            let rho = vars.states[term.variable].matrix();
            let g = &mut grads[term.variable];
            let scale = t * term.weight;
            match &term.cluster {
                Some(split) => {
                    let (l, _) = log_and_entropy(&split.trace_out(rho));
                    split.embed_add(g, l.as_ref(), scale);
                }
                None => {
                    let (l, _) = log_and_entropy(&rho.to_owned());
                    dense::axpy(g, scale, l.as_ref());
                }
            }
            if let Some(split) = &term.shield {
                let (l, _) = log_and_entropy(&split.trace_out(rho));
                split.embed_add(g, l.as_ref(), -scale);
            }
        }
    }
    Ok(grads
        .into_iter()
        .zip(&problem.variables)
        .map(|(g, v)| HermitianOperator::from_raw(v.clone(), dense::hermitian_part(g.as_ref())))
        .collect())
}
