//! Dense Hermitian operator algebra on labeled tensor-product spaces.
//!
//! Every operator carries the [`SiteSpace`] it acts on. Partial traces,
//! embeddings and the ⊙-product all work by site label, so operands on
//! different supports can be combined without manual index bookkeeping.
//! Entropies are in nats.

pub(crate) mod dense;
mod entropy;
pub mod random;
mod space;
mod spectral;

use faer::{c64, Mat, MatRef};
use thiserror::Error;

pub use entropy::{cmi, conditional_entropy, entropy_of_eigenvalues, vn_entropy, ENTROPY_CUTOFF};
pub use space::SiteSpace;
pub(crate) use space::Split;
pub use spectral::{eigh, matrix_exp, matrix_log, odot, odot_inverse, Spectrum, LOG_FLOOR};

/// Absolute Frobenius tolerance (scaled by `max(1, ‖H‖_F)`) for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error("matrix is not Hermitian (‖M − M†‖_F = {deviation:.3e})")]
    NonHermitian { deviation: f64 },
    #[error("operator has negative eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("density matrix trace {trace} differs from 1")]
    TraceNotOne { trace: f64 },
    #[error("site {0} is not part of the operator's space")]
    UnknownSite(usize),
    #[error("site {0} appears more than once")]
    DuplicateSite(usize),
    #[error("site {0} has zero local dimension")]
    ZeroDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("eigendecomposition failed")]
    Eigen,
}

/// Hermitian operator on a labeled tensor-product space.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    space: SiteSpace,
    matrix: Mat<c64>,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity, then symmetrizes.
    pub fn new(space: SiteSpace, matrix: Mat<c64>) -> Result<Self, OpError> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(OpError::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let deviation = dense::hermitian_deviation(matrix.as_ref());
        if deviation > HERMITIAN_TOL * dense::frobenius(matrix.as_ref()).max(1.0) {
            return Err(OpError::NonHermitian { deviation });
        }
        Ok(Self::from_raw(space, matrix))
    }

    /// Symmetrizes without validating; callers guarantee shape and near-Hermiticity.
    pub(crate) fn from_raw(space: SiteSpace, matrix: Mat<c64>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        let matrix = dense::hermitian_part(matrix.as_ref());
        Self { space, matrix }
    }

    pub fn zeros(space: SiteSpace) -> Self {
        let n = space.dim();
        Self {
            space,
            matrix: Mat::zeros(n, n),
        }
    }

    pub fn identity(space: SiteSpace) -> Self {
        let n = space.dim();
        Self {
            space,
            matrix: dense::identity(n),
        }
    }

    /// Scalar `value` on the empty space.
    pub fn scalar(value: f64) -> Self {
        Self {
            space: SiteSpace::empty(),
            matrix: dense::diagonal(&[value]),
        }
    }

    pub fn from_diagonal(space: SiteSpace, diag: &[f64]) -> Result<Self, OpError> {
        if diag.len() != space.dim() {
            return Err(OpError::DimensionMismatch {
                expected: space.dim(),
                found: diag.len(),
            });
        }
        Ok(Self {
            space,
            matrix: dense::diagonal(diag),
        })
    }

    pub fn space(&self) -> &SiteSpace {
        &self.space
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn trace(&self) -> f64 {
        dense::trace(self.matrix.as_ref()).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        dense::frobenius(self.matrix.as_ref())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: dense::scaled(self.matrix.as_ref(), s),
        }
    }

    /// `self + s·other`; `other` is embedded into `self`'s space when its support is smaller.
    pub fn add_scaled(&self, other: &HermitianOperator, s: f64) -> Result<Self, OpError> {
        let other = other.embed(&self.space)?;
        let mut matrix = self.matrix.clone();
        dense::axpy(&mut matrix, s, other.matrix());
        Ok(Self {
            space: self.space.clone(),
            matrix,
        })
    }

    /// `Tr(self · other)` after bringing both onto a common space.
    pub fn trace_product(&self, other: &HermitianOperator) -> Result<f64, OpError> {
        let joint = self.space.union(&other.space)?;
        if joint.same_sites(&self.space) && self.space == other.space {
            return Ok(dense::trace_product(self.matrix(), other.matrix()));
        }
        let a = self.embed(&joint)?;
        let b = other.embed(&joint)?;
        Ok(dense::trace_product(a.matrix(), b.matrix()))
    }

    /// Tensor product with an operator on disjoint sites.
    pub fn tensor(&self, other: &HermitianOperator) -> Result<Self, OpError> {
        if let Some(&l) = other.space.labels().iter().find(|l| self.space.contains(**l)) {
            return Err(OpError::DuplicateSite(l));
        }
        let space = self.space.union(&other.space)?;
        Ok(Self {
            space,
            matrix: dense::kron(self.matrix(), other.matrix()),
        })
    }

    /// `self ⊗ I` on `target`, with `target`'s index ordering.
    pub fn embed(&self, target: &SiteSpace) -> Result<Self, OpError> {
        for &l in self.space.labels() {
            match (target.dim_of(l), self.space.dim_of(l)) {
                (None, _) => return Err(OpError::UnknownSite(l)),
                (Some(a), Some(b)) if a != b => {
                    return Err(OpError::DimensionMismatch { expected: a, found: b })
                }
                _ => {}
            }
        }
        if &self.space == target {
            return Ok(self.clone());
        }
        // first reorder our own factors to match the target's relative order
        let ordered: Vec<usize> = target
            .labels()
            .iter()
            .copied()
            .filter(|l| self.space.contains(*l))
            .collect();
        let local = if ordered == self.space.labels() {
            self.matrix.clone()
        } else {
            Split::new(&self.space, &ordered)?.trace_out(self.matrix())
        };
        let matrix = Split::new(target, &ordered)?.embed(local.as_ref());
        Ok(Self {
            space: target.clone(),
            matrix,
        })
    }

    /// Partial trace keeping `keep` (result ordered as `keep`).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, OpError> {
        let space = self.space.subspace(keep)?;
        let matrix = Split::new(&self.space, keep)?.trace_out(self.matrix());
        Ok(Self::from_raw(space, matrix))
    }

    pub fn eigh(&self) -> Result<Spectrum, OpError> {
        eigh(self)
    }
}

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Validates positivity and normalization.
    pub fn new(op: HermitianOperator) -> Result<Self, OpError> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(OpError::TraceNotOne { trace });
        }
        let spectrum = op.eigh()?;
        let min = spectrum.values().first().copied().unwrap_or(0.0);
        if min < -POSITIVITY_TOL {
            return Err(OpError::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { op })
    }

    /// Validates after rescaling to unit trace.
    pub fn normalized(op: HermitianOperator) -> Result<Self, OpError> {
        let trace = op.trace();
        if trace.abs() < f64::MIN_POSITIVE {
            return Err(OpError::ZeroOperator);
        }
        Self::new(op.scale(1.0 / trace))
    }

    pub(crate) fn from_raw(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn from_matrix(space: SiteSpace, matrix: Mat<c64>) -> Result<Self, OpError> {
        Self::new(HermitianOperator::new(space, matrix)?)
    }

    pub fn maximally_mixed(space: SiteSpace) -> Self {
        let d = space.dim() as f64;
        Self {
            op: HermitianOperator::identity(space).scale(1.0 / d),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(space: SiteSpace, psi: &[c64]) -> Result<Self, OpError> {
        if psi.len() != space.dim() {
            return Err(OpError::DimensionMismatch {
                expected: space.dim(),
                found: psi.len(),
            });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(OpError::ZeroOperator);
        }
        let n = psi.len();
        let matrix = Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Ok(Self {
            op: HermitianOperator::from_raw(space, matrix),
        })
    }

    /// Diagonal state from a probability vector.
    pub fn classical(space: SiteSpace, probabilities: &[f64]) -> Result<Self, OpError> {
        Self::new(HermitianOperator::from_diagonal(space, probabilities)?)
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    pub fn space(&self) -> &SiteSpace {
        self.op.space()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, OpError> {
        Ok(self.op.eigh()?.values().to_vec())
    }

    /// Partial trace keeping `keep`, in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, OpError> {
        Ok(Self {
            op: self.op.partial_trace(keep)?,
        })
    }

    /// Reorders the tensor factors to the order of `labels` (a permutation of the sites).
    pub fn reordered(&self, labels: &[usize]) -> Result<DensityMatrix, OpError> {
        if labels.len() != self.space().len() {
            return Err(OpError::DimensionMismatch {
                expected: self.space().len(),
                found: labels.len(),
            });
        }
        self.partial_trace(labels)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, OpError> {
        Ok(Self {
            op: self.op.tensor(&other.op)?,
        })
    }

    /// `Tr(ρ h)` with `h` supported anywhere inside `ρ`'s space.
    pub fn expectation(&self, h: &HermitianOperator) -> Result<f64, OpError> {
        if h.space() == self.space() {
            return Ok(dense::trace_product(self.matrix(), h.matrix()));
        }
        let keep: Vec<usize> = h.space().labels().to_vec();
        let marginal = self.partial_trace(&keep)?;
        Ok(dense::trace_product(marginal.matrix(), h.matrix()))
    }

    /// `½‖ρ − σ‖₁`; `other` is reordered to this state's site order if needed.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64, OpError> {
        trace_distance(self.as_operator(), other.as_operator())
    }
}

/// `½‖A − B‖₁` for Hermitian operators on the same set of sites.
pub fn trace_distance(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64, OpError> {
    if !a.space().same_sites(b.space()) {
        return Err(OpError::InvalidPartition(
            "trace distance between operators on different sites".into(),
        ));
    }
    let b = if a.space() == b.space() {
        b.clone()
    } else {
        b.partial_trace(a.space().labels())?
    };
    let diff = a.add_scaled(&b, -1.0)?;
    Ok(0.5 * diff.eigh()?.values().iter().map(|x| x.abs()).sum::<f64>())
}

/// Partial trace of a density matrix onto `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix, OpError> {
    rho.partial_trace(keep)
}

/// `Σ w_i h_i`, each term embedded into `target`, accumulated in one dense matrix.
pub fn sum_local_terms<'a>(
    target: &SiteSpace,
    terms: impl IntoIterator<Item = (&'a HermitianOperator, f64)>,
) -> Result<HermitianOperator, OpError> {
    let n = target.dim();
    let mut m = Mat::<c64>::zeros(n, n);
    for (h, w) in terms {
        for &l in h.space().labels() {
            if target.dim_of(l) != h.space().dim_of(l) {
                return Err(OpError::UnknownSite(l));
            }
        }
        Split::new(target, h.space().labels())?.embed_add(&mut m, h.matrix(), w);
    }
    Ok(HermitianOperator::from_raw(target.clone(), m))
}

/// `h ⊗ I` on `target`.
pub fn embed_local(h: &HermitianOperator, target: &SiteSpace) -> Result<HermitianOperator, OpError> {
    h.embed(target)
}
