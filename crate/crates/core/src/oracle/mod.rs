//! Exact reference values from full diagonalization and transfer matrices.

use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::opalg::{dense, entropy_of_eigenvalues, DensityMatrix, HermitianOperator, OpError};

/// Largest Hilbert-space dimension the oracles accept.
pub const MAX_ORACLE_DIM: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension {dim} exceeds the oracle limit {MAX_ORACLE_DIM}")]
    TooLarge { dim: usize },
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error(transparent)]
    Operator(#[from] OpError),
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactResult {
    pub temperature: f64,
    pub n_sites: usize,
    pub free_energy: f64,
    pub free_energy_per_site: f64,
    pub energy: f64,
    pub entropy: f64,
    pub ground_energy: f64,
    #[serde(skip)]
    pub gibbs: Option<DensityMatrix>,
}

impl ExactResult {
    pub fn energy_per_site(&self) -> f64 {
        self.energy / self.n_sites as f64
    }

    pub fn entropy_per_site(&self) -> f64 {
        self.entropy / self.n_sites as f64
    }
}

fn guard(h: &HermitianOperator) -> Result<(), OracleError> {
    if h.dim() > MAX_ORACLE_DIM {
        return Err(OracleError::TooLarge { dim: h.dim() });
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<(), OracleError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(OracleError::BadTemperature(t));
    }
    Ok(())
}

fn is_diagonal(h: &HermitianOperator) -> bool {
    let m = h.matrix();
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == dense::ZERO))
}

/// Eigenvalues plus (for non-diagonal input) eigenvectors; diagonal input skips the solver.
fn spectrum(h: &HermitianOperator) -> Result<(Vec<f64>, Option<Mat<faer::c64>>), OracleError> {
    guard(h)?;
    if is_diagonal(h) {
        let m = h.matrix();
        return Ok(((0..m.nrows()).map(|i| m[(i, i)].re).collect(), None));
    }
    let s = h.eigh()?;
    Ok((s.values().to_vec(), Some(s.vectors().to_owned())))
}

/// Boltzmann weights `e^{−(λ−λ_min)/T}` normalized to probabilities, and `ln Z` shifted by `λ_min/T`.
fn boltzmann(values: &[f64], t: f64) -> (Vec<f64>, f64) {
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = values.iter().map(|&e| (-(e - e0) / t).exp()).collect();
    let z: f64 = w.iter().sum();
    (w.iter().map(|x| x / z).collect(), z.ln() - e0 / t)
}

fn gibbs_from(
    h: &HermitianOperator,
    probs: &[f64],
    vectors: Option<&Mat<faer::c64>>,
) -> DensityMatrix {
    let m = match vectors {
        Some(v) => dense::conjugate_diagonal(v.as_ref(), probs),
        None => dense::diagonal(probs),
    };
    DensityMatrix::from_raw(HermitianOperator::from_raw(h.space().clone(), m))
}

/// `exp(−H/T)/Z`.
pub fn gibbs_state(h: &HermitianOperator, t: f64) -> Result<DensityMatrix, OracleError> {
    check_temperature(t)?;
    let (values, vectors) = spectrum(h)?;
    let (p, _) = boltzmann(&values, t);
    Ok(gibbs_from(h, &p, vectors.as_ref()))
}

/// `F = −T ln Tr e^{−H/T}` with `E`, `S` and `E₀` from the same spectrum.
///
/// `n_sites` only sets the per-site normalization. The Gibbs state is kept when
/// `keep_state` is true.
pub fn exact_free_energy(
    h: &HermitianOperator,
    t: f64,
    n_sites: usize,
    keep_state: bool,
) -> Result<ExactResult, OracleError> {
    check_temperature(t)?;
    let (values, vectors) = spectrum(h)?;
    let (p, ln_z) = boltzmann(&values, t);
    let energy: f64 = p.iter().zip(&values).map(|(p, e)| p * e).sum();
    let entropy = entropy_of_eigenvalues(&p);
    let free_energy = -t * ln_z;
    let ground_energy = values.iter().copied().fold(f64::INFINITY, f64::min);
    let n = n_sites.max(1);
    Ok(ExactResult {
        temperature: t,
        n_sites: n,
        free_energy,
        free_energy_per_site: free_energy / n as f64,
        energy,
        entropy,
        ground_energy,
        gibbs: keep_state.then(|| gibbs_from(h, &p, vectors.as_ref())),
    })
}

/// Smallest eigenvalue of `H`.
pub fn ground_energy(h: &HermitianOperator) -> Result<f64, OracleError> {
    let (values, _) = spectrum(h)?;
    Ok(values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Free energy per site of the infinite chain `−J Σ σᶻσᶻ − h Σ σᶻ` from the
/// largest transfer-matrix eigenvalue.
pub fn ising_transfer_free_energy(j: f64, h: f64, t: f64) -> f64 {
    // λ± = e^{K} cosh(b) ± sqrt(e^{2K} sinh²(b) + e^{−2K}), K = J/T, b = h/T;
    // factor out e^{|K|} so nothing overflows at low T
    let k = j / t;
    let b = h / t;
    let ln_lambda = if k >= 0.0 {
        k + (b.cosh() + (b.sinh().powi(2) + (-4.0 * k).exp()).sqrt()).ln()
    } else {
        -k + ((2.0 * k).exp() * b.cosh()
            + ((4.0 * k).exp() * b.sinh().powi(2) + 1.0).sqrt())
        .ln()
    };
    -t * ln_lambda
}
