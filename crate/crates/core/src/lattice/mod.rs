//! Lattice geometry, site orderings, Markov shields and cluster Hamiltonians.
//!
//! Finite lattices label their sites `0..N`: left to right on a chain and
//! row-major on a square lattice (`label = row * lx + x`). Square-lattice
//! offsets `(dx, dy)` use `dy > 0` for *earlier* rows, so in the default
//! raster ordering a site's predecessors are the offsets with `dy > 0`, or
//! `dy == 0` and `dx < 0`.

mod model;
mod shield;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opalg::{sum_local_terms, HermitianOperator, OpError, SiteSpace};

pub use model::{model_term, ModelKind, ModelSpec};
pub use shield::{
    assign_terms, cluster_hamiltonian, markov_shield, markov_shields, ti_cluster, Neighborhood,
    Shield, ShieldTemplate, TermAssignment, TiCluster,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("unsupported lattice: {0}")]
    Unsupported(String),
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("site {0} is not on the lattice")]
    UnknownSite(usize),
    #[error("site {site} has an empty neighborhood but is not first in the ordering")]
    EmptyNeighborhood { site: usize },
    #[error("shield too small: term on sites {support:?} fits in no cluster")]
    ShieldTooSmall { support: Vec<usize> },
    #[error("shield too small: template lacks the bond partner at offset {offset:?}")]
    TemplateTooSmall { offset: (i64, i64) },
    #[error("invalid shield template: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Operator(#[from] OpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    Square,
    /// Infinite translation-invariant chain.
    TiChain,
    /// Infinite translation-invariant square lattice.
    TiSquare,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
            LatticeKind::TiChain => "ti_chain",
            LatticeKind::TiSquare => "ti_square",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "chain" => Some(LatticeKind::Chain),
            "square" => Some(LatticeKind::Square),
            "ti_chain" => Some(LatticeKind::TiChain),
            "ti_square" => Some(LatticeKind::TiSquare),
            _ => None,
        }
    }

    pub fn is_translation_invariant(self) -> bool {
        matches!(self, LatticeKind::TiChain | LatticeKind::TiSquare)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(Boundary::Open),
            "periodic" => Some(Boundary::Periodic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Sites per axis; empty for translation-invariant kinds.
    pub extent: Vec<usize>,
    pub boundary: Boundary,
    /// Locality radius `w` of the Hamiltonian terms.
    pub radius: usize,
}

impl LatticeSpec {
    pub fn chain(n: usize, boundary: Boundary) -> Self {
        Self {
            kind: LatticeKind::Chain,
            extent: vec![n],
            boundary,
            radius: 1,
        }
    }

    pub fn square(lx: usize, ly: usize, boundary: Boundary) -> Self {
        Self {
            kind: LatticeKind::Square,
            extent: vec![lx, ly],
            boundary,
            radius: 1,
        }
    }

    pub fn ti_chain() -> Self {
        Self {
            kind: LatticeKind::TiChain,
            extent: Vec::new(),
            boundary: Boundary::Periodic,
            radius: 1,
        }
    }

    pub fn ti_square() -> Self {
        Self {
            kind: LatticeKind::TiSquare,
            extent: Vec::new(),
            boundary: Boundary::Periodic,
            radius: 1,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.radius < 1 {
            return Err(LatticeError::InvalidSpec("locality radius must be ≥ 1".into()));
        }
        let axes = match self.kind {
            LatticeKind::Chain => 1,
            LatticeKind::Square => 2,
            LatticeKind::TiChain | LatticeKind::TiSquare => 0,
        };
        if self.extent.len() != axes {
            return Err(LatticeError::InvalidSpec(format!(
                "{} lattice needs {axes} extents, got {}",
                self.kind.name(),
                self.extent.len()
            )));
        }
        if axes > 0 && self.extent.iter().product::<usize>() < 2 {
            return Err(LatticeError::InvalidSpec("finite lattices need N ≥ 2 sites".into()));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> Option<usize> {
        (!self.kind.is_translation_invariant()).then(|| self.extent.iter().product())
    }
}

/// Geometry of a finite lattice: coordinates `(x, row)` and nearest-neighbor bonds.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    coords: Vec<(i64, i64)>,
    bonds: Vec<(usize, usize)>,
}

impl Lattice {
    pub fn new(spec: &LatticeSpec) -> Result<Self, LatticeError> {
        spec.validate()?;
        let periodic = spec.boundary == Boundary::Periodic;
        let (coords, bonds) = match spec.kind {
            LatticeKind::Chain => {
                let n = spec.extent[0];
                let coords = (0..n as i64).map(|x| (x, 0)).collect();
                let mut bonds: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
                if periodic && n > 2 {
                    bonds.push((n - 1, 0));
                }
                (coords, bonds)
            }
            LatticeKind::Square => {
                let (lx, ly) = (spec.extent[0], spec.extent[1]);
                let label = |x: usize, r: usize| r * lx + x;
                let mut coords = Vec::with_capacity(lx * ly);
                let mut bonds = Vec::new();
                for r in 0..ly {
                    for x in 0..lx {
                        coords.push((x as i64, r as i64));
                        if x + 1 < lx {
                            bonds.push((label(x, r), label(x + 1, r)));
                        } else if periodic && lx > 2 {
                            bonds.push((label(x, r), label(0, r)));
                        }
                        if r + 1 < ly {
                            bonds.push((label(x, r), label(x, r + 1)));
                        } else if periodic && ly > 2 {
                            bonds.push((label(x, r), label(x, 0)));
                        }
                    }
                }
                (coords, bonds)
            }
            LatticeKind::TiChain | LatticeKind::TiSquare => {
                return Err(LatticeError::Unsupported(format!(
                    "{} has no finite site list; build a translation-invariant cluster instead",
                    spec.kind.name()
                )))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            coords,
            bonds,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// `(x, row)` of a site.
    pub fn coords(&self, site: usize) -> (i64, i64) {
        self.coords[site]
    }

    /// Site at `(x, row)`, wrapping on periodic axes.
    pub fn site_at(&self, x: i64, row: i64) -> Option<usize> {
        let wrap = |v: i64, n: usize| -> Option<i64> {
            let n = n as i64;
            if self.spec.boundary == Boundary::Periodic {
                Some(v.rem_euclid(n))
            } else if (0..n).contains(&v) {
                Some(v)
            } else {
                None
            }
        };
        match self.spec.kind {
            LatticeKind::Chain => {
                if row != 0 {
                    return None;
                }
                wrap(x, self.spec.extent[0]).map(|x| x as usize)
            }
            _ => {
                let lx = self.spec.extent[0];
                let x = wrap(x, lx)?;
                let r = wrap(row, self.spec.extent[1])?;
                Some(r as usize * lx + x as usize)
            }
        }
    }

    /// Manhattan distance, minimum image on periodic axes.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ax, ar) = self.coords[a];
        let (bx, br) = self.coords[b];
        let axis = |d: i64, n: usize| -> usize {
            let d = d.unsigned_abs() as usize;
            if self.spec.boundary == Boundary::Periodic {
                d.min(n - d)
            } else {
                d
            }
        };
        let dx = axis(ax - bx, self.spec.extent[0]);
        let dr = if self.spec.extent.len() > 1 {
            axis(ar - br, self.spec.extent[1])
        } else {
            0
        };
        dx + dr
    }

    /// Largest pairwise distance within a support.
    pub fn support_radius(&self, support: &[usize]) -> usize {
        let mut r = 0;
        for (i, &a) in support.iter().enumerate() {
            for &b in &support[i + 1..] {
                r = r.max(self.distance(a, b));
            }
        }
        r
    }

    pub fn space(&self) -> SiteSpace {
        SiteSpace::qubits(0..self.n_sites())
    }

    /// Raster (row-major) ordering, which is also left-to-right on chains.
    pub fn raster_ordering(&self) -> SiteOrdering {
        SiteOrdering::new((0..self.n_sites()).collect()).expect("identity permutation")
    }
}

/// Permutation assigning each site a position in the entropy chain rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteOrdering {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl SiteOrdering {
    /// `order[p]` is the site at position `p`; must be a permutation of `0..N`.
    pub fn new(order: Vec<usize>) -> Result<Self, LatticeError> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (p, &s) in order.iter().enumerate() {
            if s >= n || position[s] != usize::MAX {
                return Err(LatticeError::InvalidSpec(format!(
                    "ordering is not a permutation of 0..{n}"
                )));
            }
            position[s] = p;
        }
        Ok(Self { order, position })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn sites(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, site: usize) -> usize {
        self.position[site]
    }

    /// Sites strictly before `site`.
    pub fn predecessors(&self, site: usize) -> &[usize] {
        &self.order[..self.position[site]]
    }

    /// Sorts sites by ordering position.
    pub fn sort(&self, sites: &mut [usize]) {
        sites.sort_by_key(|&s| self.position[s]);
    }
}

/// One term `h_X` of the Hamiltonian.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub operator: HermitianOperator,
    /// Fraction of the term given to one cluster; 1 unless fractional assignment is used.
    pub weight: f64,
}

/// A finite lattice together with its Hamiltonian terms and default ordering.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub lattice: Lattice,
    pub model: ModelSpec,
    pub terms: Vec<LocalTerm>,
    pub ordering: SiteOrdering,
}

impl LatticeModel {
    /// Full Hamiltonian on all sites (dense; small systems only).
    pub fn hamiltonian(&self) -> Result<HermitianOperator, LatticeError> {
        Ok(sum_local_terms(
            &self.lattice.space(),
            self.terms.iter().map(|t| (&t.operator, t.weight)),
        )?)
    }
}

/// Builds all nearest-neighbor bond terms (and nonzero single-site field terms).
pub fn build_lattice(spec: &LatticeSpec, model: &ModelSpec) -> Result<LatticeModel, LatticeError> {
    if !model.is_finite() {
        return Err(LatticeError::InvalidSpec("couplings must be finite".into()));
    }
    let lattice = Lattice::new(spec)?;
    let mut terms = Vec::new();
    for &(a, b) in lattice.bonds() {
        let support = vec![a, b];
        if lattice.support_radius(&support) > spec.radius {
            return Err(LatticeError::InvalidSpec(format!(
                "bond {support:?} exceeds locality radius {}",
                spec.radius
            )));
        }
        terms.push(LocalTerm {
            operator: model_term(model, &support),
            support,
            weight: 1.0,
        });
    }
    if model.has_field() {
        for s in 0..lattice.n_sites() {
            terms.push(LocalTerm {
                support: vec![s],
                operator: model_term(model, &[s]),
                weight: 1.0,
            });
        }
    }
    let ordering = lattice.raster_ordering();
    Ok(LatticeModel {
        lattice,
        model: *model,
        terms,
        ordering,
    })
}
