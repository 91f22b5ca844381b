use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{model_term, Lattice, LatticeError, LatticeKind, LocalTerm, ModelSpec, SiteOrdering};
use crate::opalg::{HermitianOperator, SiteSpace};

/// How the neighborhood `N_k` of each site is declared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Every site within lattice (Manhattan, minimum-image) distance `r`.
    Radius(usize),
    /// Offsets `(dx, dy)` from each site; `dy > 0` points to earlier rows.
    Offsets(Vec<(i64, i64)>),
    /// `N_k` listed per site label.
    Explicit(Vec<Vec<usize>>),
}

impl Neighborhood {
    fn of(&self, lattice: &Lattice, k: usize) -> Result<Vec<usize>, LatticeError> {
        let n = lattice.n_sites();
        let mut out: Vec<usize> = match self {
            Neighborhood::Radius(r) => (0..n)
                .filter(|&s| s != k && lattice.distance(s, k) <= *r)
                .collect(),
            Neighborhood::Offsets(offsets) => {
                let (x, row) = lattice.coords(k);
                offsets
                    .iter()
                    .filter_map(|&(dx, dy)| lattice.site_at(x + dx, row - dy))
                    .filter(|&s| s != k)
                    .collect()
            }
            Neighborhood::Explicit(lists) => {
                let list = lists.get(k).ok_or(LatticeError::UnknownSite(k))?;
                if let Some(&bad) = list.iter().find(|&&s| s >= n) {
                    return Err(LatticeError::UnknownSite(bad));
                }
                list.iter().copied().filter(|&s| s != k).collect()
            }
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Neighborhood, Markov shield `M_k = {<k} ∩ N_k` and cluster `C_k = M_k ∪ {k}` of one site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shield {
    pub site: usize,
    pub neighborhood: Vec<usize>,
    /// Sorted by ordering position.
    pub shield: Vec<usize>,
    /// The shield followed by `site`.
    pub cluster: Vec<usize>,
}

impl Shield {
    pub fn cluster_space(&self) -> SiteSpace {
        SiteSpace::qubits(self.cluster.iter().copied())
    }
}

pub fn markov_shield(
    lattice: &Lattice,
    ordering: &SiteOrdering,
    neighborhood: &Neighborhood,
    k: usize,
) -> Result<Shield, LatticeError> {
    if k >= lattice.n_sites() || ordering.len() != lattice.n_sites() {
        return Err(LatticeError::UnknownSite(k));
    }
    let nk = neighborhood.of(lattice, k)?;
    if nk.is_empty() && ordering.position(k) != 0 {
        return Err(LatticeError::EmptyNeighborhood { site: k });
    }
    let before = ordering.position(k);
    let mut shield: Vec<usize> = nk
        .iter()
        .copied()
        .filter(|&s| ordering.position(s) < before)
        .collect();
    ordering.sort(&mut shield);
    let mut cluster = shield.clone();
    cluster.push(k);
    Ok(Shield {
        site: k,
        neighborhood: nk,
        shield,
        cluster,
    })
}

/// Shields of all sites, listed in ordering order.
pub fn markov_shields(
    lattice: &Lattice,
    ordering: &SiteOrdering,
    neighborhood: &Neighborhood,
) -> Result<Vec<Shield>, LatticeError> {
    ordering
        .sites()
        .iter()
        .map(|&k| markov_shield(lattice, ordering, neighborhood, k))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermAssignment {
    /// Whole term to the cluster of its highest-ordered site (falling back to the
    /// earliest cluster that contains it).
    #[default]
    HighestSite,
    /// Equal fractions to every cluster containing the term.
    Fractional,
}

impl TermAssignment {
    pub fn name(self) -> &'static str {
        match self {
            TermAssignment::HighestSite => "highest_site",
            TermAssignment::Fractional => "fractional",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "highest_site" => Some(TermAssignment::HighestSite),
            "fractional" => Some(TermAssignment::Fractional),
            _ => None,
        }
    }
}

/// For each shield (same order as `shields`), the `(term index, weight)` pairs it carries.
pub fn assign_terms(
    shields: &[Shield],
    terms: &[LocalTerm],
    mode: TermAssignment,
) -> Result<Vec<Vec<(usize, f64)>>, LatticeError> {
    let mut out = vec![Vec::new(); shields.len()];
    let owner: HashMap<usize, usize> = shields.iter().enumerate().map(|(i, s)| (s.site, i)).collect();
    for (t, term) in terms.iter().enumerate() {
        let holders: Vec<usize> = shields
            .iter()
            .enumerate()
            .filter(|(_, s)| term.support.iter().all(|x| s.cluster.contains(x)))
            .map(|(i, _)| i)
            .collect();
        if holders.is_empty() {
            return Err(LatticeError::ShieldTooSmall {
                support: term.support.clone(),
            });
        }
        match mode {
            TermAssignment::HighestSite => {
                // shield indices follow the ordering, so the largest index is the highest site
                let highest = term
                    .support
                    .iter()
                    .filter_map(|s| owner.get(s))
                    .max()
                    .copied();
                let target = match highest {
                    Some(h) if holders.contains(&h) => h,
                    _ => holders[0],
                };
                out[target].push((t, term.weight));
            }
            TermAssignment::Fractional => {
                let w = term.weight / holders.len() as f64;
                for h in holders {
                    out[h].push((t, w));
                }
            }
        }
    }
    Ok(out)
}

/// `Ĥ_k` on the cluster of `shields[index]`.
pub fn cluster_hamiltonian(
    index: usize,
    shields: &[Shield],
    terms: &[LocalTerm],
    mode: TermAssignment,
) -> Result<HermitianOperator, LatticeError> {
    let assignment = assign_terms(shields, terms, mode)?;
    let shield = shields.get(index).ok_or(LatticeError::UnknownSite(index))?;
    build_cluster_hamiltonian(shield, terms, &assignment[index])
}

pub(crate) fn build_cluster_hamiltonian(
    shield: &Shield,
    terms: &[LocalTerm],
    assigned: &[(usize, f64)],
) -> Result<HermitianOperator, LatticeError> {
    let mut h = HermitianOperator::zeros(shield.cluster_space());
    for &(t, w) in assigned {
        h = h.add_scaled(&terms[t].operator, w)?;
    }
    Ok(h)
}

/// Offsets `(dx, dy)` of the Markov shield of the origin on an infinite lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShieldTemplate {
    offsets: Vec<(i64, i64)>,
}

impl ShieldTemplate {
    /// Every offset must precede the origin in raster order and appear once.
    pub fn new(offsets: Vec<(i64, i64)>) -> Result<Self, LatticeError> {
        for (i, &(dx, dy)) in offsets.iter().enumerate() {
            if !(dy > 0 || (dy == 0 && dx < 0)) {
                return Err(LatticeError::InvalidTemplate(format!(
                    "offset ({dx},{dy}) does not precede the origin"
                )));
            }
            if offsets[..i].contains(&(dx, dy)) {
                return Err(LatticeError::InvalidTemplate(format!(
                    "offset ({dx},{dy}) listed twice"
                )));
            }
        }
        Ok(Self { offsets })
    }

    /// `n` predecessors on a chain: `(-1,0) .. (-n,0)`.
    pub fn chain(n: usize) -> Self {
        Self {
            offsets: (1..=n as i64).map(|d| (-d, 0)).collect(),
        }
    }

    /// Four sites to the left and three in the row above.
    pub fn square7() -> Self {
        Self {
            offsets: vec![(-1, 0), (-2, 0), (-3, 0), (-4, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }

    /// Five sites to the left and five in the row above.
    pub fn square10() -> Self {
        let mut offsets: Vec<(i64, i64)> = (1..=5).map(|d| (-d, 0)).collect();
        offsets.extend((-2..=2).map(|dx| (dx, 1)));
        Self { offsets }
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn is_one_dimensional(&self) -> bool {
        self.offsets.iter().all(|&(_, dy)| dy == 0)
    }

    /// Renders as `[(-1,0),(-2,0)]`.
    pub fn render(&self) -> String {
        let parts: Vec<String> = self
            .offsets
            .iter()
            .map(|(dx, dy)| format!("({dx},{dy})"))
            .collect();
        format!("[{}]", parts.join(","))
    }

    /// Parses the [`render`](Self::render) format.
    pub fn parse(text: &str) -> Result<Self, LatticeError> {
        let bad = |why: &str| LatticeError::InvalidTemplate(format!("{why} in `{text}`"));
        let inner = text
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| bad("expected [...]"))?;
        let mut offsets = Vec::new();
        let mut rest = inner.trim();
        while !rest.is_empty() {
            let body = rest.strip_prefix('(').ok_or_else(|| bad("expected ("))?;
            let close = body.find(')').ok_or_else(|| bad("unclosed ("))?;
            let (pair, tail) = body.split_at(close);
            let mut parts = pair.split(',');
            let mut coord = || -> Result<i64, LatticeError> {
                parts
                    .next()
                    .and_then(|p| p.trim().parse().ok())
                    .ok_or_else(|| bad("expected integer offset"))
            };
            let (dx, dy) = (coord()?, coord()?);
            if parts.next().is_some() {
                return Err(bad("offsets have two coordinates"));
            }
            offsets.push((dx, dy));
            rest = tail[1..].trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r.trim_start();
                if rest.is_empty() {
                    return Err(bad("trailing comma"));
                }
            } else if !rest.is_empty() {
                return Err(bad("expected ,"));
            }
        }
        Self::new(offsets)
    }
}

/// Single-cluster problem data for an infinite translation-invariant lattice.
///
/// Cluster qubit `i` sits at `sites[i]`; the origin is qubit 0 and the shield is
/// qubits `1..`.
#[derive(Clone, Debug)]
pub struct TiCluster {
    pub sites: Vec<(i64, i64)>,
    pub template: ShieldTemplate,
    /// Per-site cluster Hamiltonian on labels `0..sites.len()`.
    pub hamiltonian: HermitianOperator,
    /// Unit translations `e` used for consistency.
    pub translations: Vec<(i64, i64)>,
    /// For each translation, qubits `a` and the qubits `b` holding the same sites shifted by `−e`;
    /// the marginal on `a` must equal the marginal on `b`.
    pub constraints: Vec<(Vec<usize>, Vec<usize>)>,
}

impl TiCluster {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn space(&self) -> SiteSpace {
        SiteSpace::qubits(0..self.sites.len())
    }

    pub fn shield_labels(&self) -> Vec<usize> {
        (1..self.sites.len()).collect()
    }
}

/// Builds the translation-invariant cluster: the origin carries its left bond, its
/// upper bond on the square lattice, and its field term.
pub fn ti_cluster(
    kind: LatticeKind,
    model: &ModelSpec,
    template: &ShieldTemplate,
) -> Result<TiCluster, LatticeError> {
    let (bond_offsets, translations): (Vec<(i64, i64)>, Vec<(i64, i64)>) = match kind {
        LatticeKind::TiChain => {
            if !template.is_one_dimensional() {
                return Err(LatticeError::InvalidTemplate(
                    "chain templates must have dy = 0".into(),
                ));
            }
            (vec![(-1, 0)], vec![(1, 0)])
        }
        LatticeKind::TiSquare => (vec![(-1, 0), (0, 1)], vec![(1, 0), (0, -1)]),
        other => {
            return Err(LatticeError::Unsupported(format!(
                "{} is not translation invariant",
                other.name()
            )))
        }
    };
    let mut sites = vec![(0, 0)];
    sites.extend_from_slice(template.offsets());
    let index: HashMap<(i64, i64), usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    let space = SiteSpace::qubits(0..sites.len());
    let mut h = HermitianOperator::zeros(space);
    for off in &bond_offsets {
        let j = *index
            .get(off)
            .ok_or(LatticeError::TemplateTooSmall { offset: *off })?;
        h = h.add_scaled(&model_term(model, &[0, j]), 1.0)?;
    }
    if model.has_field() {
        h = h.add_scaled(&model_term(model, &[0]), 1.0)?;
    }

    let constraints = translations
        .iter()
        .filter_map(|&(ex, ey)| {
            let (a, b): (Vec<usize>, Vec<usize>) = sites
                .iter()
                .enumerate()
                .filter_map(|(i, &(x, y))| index.get(&(x - ex, y - ey)).map(|&j| (i, j)))
                .unzip();
            (!a.is_empty()).then_some((a, b))
        })
        .collect();
    Ok(TiCluster {
        sites,
        template: template.clone(),
        hamiltonian: h,
        translations,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Boundary, LatticeSpec};
    use crate::opalg::random::random_density_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_window_shield() {
        let lm = build_lattice(&LatticeSpec::chain(8, Boundary::Open), &ModelSpec::heisenberg(1.0)).unwrap();
        let nb = Neighborhood::Radius(2);
        let s = markov_shield(&lm.lattice, &lm.ordering, &nb, 4).unwrap();
        assert_eq!(s.shield, vec![2, 3]);
        assert_eq!(s.cluster, vec![2, 3, 4]);
        let first = markov_shield(&lm.lattice, &lm.ordering, &nb, 0).unwrap();
        assert!(first.shield.is_empty());
    }

    #[test]
    fn empty_neighborhood_only_for_first_site() {
        let lm = build_lattice(&LatticeSpec::chain(3, Boundary::Open), &ModelSpec::heisenberg(1.0)).unwrap();
        let nb = Neighborhood::Explicit(vec![vec![], vec![0], vec![]]);
        assert!(markov_shield(&lm.lattice, &lm.ordering, &nb, 0).is_ok());
        assert_eq!(
            markov_shield(&lm.lattice, &lm.ordering, &nb, 2),
            Err(LatticeError::EmptyNeighborhood { site: 2 })
        );
    }

    #[test]
    fn square_template_shield_size_in_bulk() {
        let lm = build_lattice(&LatticeSpec::square(8, 4, Boundary::Open), &ModelSpec::heisenberg(1.0)).unwrap();
        let t = ShieldTemplate::square7();
        let nb = Neighborhood::Offsets(t.offsets().to_vec());
        let shields = markov_shields(&lm.lattice, &lm.ordering, &nb).unwrap();
        for s in &shields {
            assert!(s.shield.len() <= 7);
        }
        let bulk = lm.lattice.site_at(5, 2).unwrap();
        let s = shields.iter().find(|s| s.site == bulk).unwrap();
        assert_eq!(s.shield.len(), 7);
        assert_eq!(s.cluster_space().dim(), 256);
    }

    #[test]
    fn shields_grow_with_neighborhood() {
        let lm = build_lattice(&LatticeSpec::square(4, 4, Boundary::Periodic), &ModelSpec::heisenberg(1.0)).unwrap();
        for k in 0..16 {
            let small = markov_shield(&lm.lattice, &lm.ordering, &Neighborhood::Radius(1), k).unwrap();
            let big = markov_shield(&lm.lattice, &lm.ordering, &Neighborhood::Radius(2), k).unwrap();
            assert!(small.shield.iter().all(|s| big.shield.contains(s)));
        }
    }

    #[test]
    fn highest_site_assignment_partitions_terms() {
        let lm = build_lattice(&LatticeSpec::square(3, 3, Boundary::Periodic), &ModelSpec::tfim(1.0, 0.5)).unwrap();
        let shields = markov_shields(&lm.lattice, &lm.ordering, &Neighborhood::Radius(2)).unwrap();
        let a = assign_terms(&shields, &lm.terms, TermAssignment::HighestSite).unwrap();
        let mut seen: Vec<usize> = a.iter().flatten().map(|&(t, _)| t).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..lm.terms.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cluster_energies_sum_to_global_energy() {
        let lm = build_lattice(&LatticeSpec::chain(4, Boundary::Open), &ModelSpec::heisenberg(1.0)).unwrap();
        let shields = markov_shields(&lm.lattice, &lm.ordering, &Neighborhood::Radius(1)).unwrap();
        let h = lm.hamiltonian().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [TermAssignment::HighestSite, TermAssignment::Fractional] {
            let rho = random_density_matrix(&lm.lattice.space(), 16, &mut rng);
            let mut e = 0.0;
            for i in 0..shields.len() {
                let hk = cluster_hamiltonian(i, &shields, &lm.terms, mode).unwrap();
                e += rho.expectation(&hk).unwrap();
            }
            assert!((e - rho.expectation(&h).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn shield_too_small_names_term() {
        let lm = build_lattice(&LatticeSpec::chain(4, Boundary::Periodic), &ModelSpec::heisenberg(1.0)).unwrap();
        let nb = Neighborhood::Explicit(vec![vec![], vec![0], vec![1], vec![2]]);
        let shields = markov_shields(&lm.lattice, &lm.ordering, &nb).unwrap();
        let err = assign_terms(&shields, &lm.terms, TermAssignment::HighestSite).unwrap_err();
        assert_eq!(err, LatticeError::ShieldTooSmall { support: vec![3, 0] });
    }

    #[test]
    fn ti_chain_cluster() {
        let c = ti_cluster(LatticeKind::TiChain, &ModelSpec::heisenberg(1.0), &ShieldTemplate::chain(3)).unwrap();
        assert_eq!(c.n_sites(), 4);
        assert_eq!(c.constraints, vec![(vec![0, 1, 2], vec![1, 2, 3])]);
        // one bond: spectrum of S·S on two sites, each level doubled twice
        let e = c.hamiltonian.eigh().unwrap();
        assert!((e.min() + 0.75).abs() < 1e-12);
        assert!((e.max() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ti_square_cluster_has_two_bonds() {
        let c = ti_cluster(LatticeKind::TiSquare, &ModelSpec::classical_ising(1.0, 0.0), &ShieldTemplate::square7()).unwrap();
        assert_eq!(c.n_sites(), 8);
        // two −σᶻσᶻ bonds from the origin: diagonal ranges over −2..2
        let e = c.hamiltonian.eigh().unwrap();
        assert!((e.min() + 2.0).abs() < 1e-12 && (e.max() - 2.0).abs() < 1e-12);
        assert_eq!(c.constraints.len(), 2);
        assert_eq!(c.constraints[0].0.len(), 6);
        assert_eq!(c.constraints[1].0.len(), 2);
    }

    #[test]
    fn ti_cluster_needs_bond_partners() {
        let t = ShieldTemplate::new(vec![(-1, 0)]).unwrap();
        assert!(matches!(
            ti_cluster(LatticeKind::TiSquare, &ModelSpec::heisenberg(1.0), &t),
            Err(LatticeError::TemplateTooSmall { offset: (0, 1) })
        ));
    }

    #[test]
    fn template_parse_round_trip_and_validation() {
        let t = ShieldTemplate::square10();
        assert_eq!(ShieldTemplate::parse(&t.render()).unwrap(), t);
        let t = ShieldTemplate::parse(" [ (-1, 0), (0 ,1) ] ").unwrap();
        assert_eq!(t.offsets(), &[(-1, 0), (0, 1)]);
        assert_eq!(ShieldTemplate::parse("[]").unwrap().len(), 0);
        assert!(ShieldTemplate::parse("[(1,0)]").is_err());
        assert!(ShieldTemplate::parse("[(-1,0),(-1,0)]").is_err());
        assert!(ShieldTemplate::parse("[(-1,0),]").is_err());
        assert!(ShieldTemplate::parse("(-1,0)").is_err());
        assert!(ShieldTemplate::parse("[(-1,x)]").is_err());
    }
}
