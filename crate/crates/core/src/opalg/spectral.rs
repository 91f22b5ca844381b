use faer::{c64, Mat, MatRef, Side};

use super::{dense, HermitianOperator, OpError, SiteSpace, HERMITIAN_TOL, POSITIVITY_TOL};

/// Default eigenvalue floor applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Ascending eigenvalues with the matching unitary eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Mat<c64>,
}

impl Spectrum {
    /// Eigendecomposition of a raw matrix; rejects non-Hermitian input.
    pub fn of_matrix(m: MatRef<'_, c64>) -> Result<Self, OpError> {
        let deviation = dense::hermitian_deviation(m);
        if deviation > HERMITIAN_TOL * dense::frobenius(m).max(1.0) {
            return Err(OpError::NonHermitian { deviation });
        }
        Ok(Self::of_hermitian(m))
    }

    /// Eigendecomposition of a matrix already known to be Hermitian.
    pub(crate) fn of_hermitian(m: MatRef<'_, c64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: Mat::zeros(0, 0),
            };
        }
        if n == 1 {
            return Self {
                values: vec![m[(0, 0)].re],
                vectors: dense::identity(1),
            };
        }
        // the self-adjoint solver only reads one triangle; it cannot fail on finite input
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .expect("self-adjoint eigendecomposition failed on finite input");
        let raw: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
        let values = order.iter().map(|&k| raw[k]).collect();
        Self { values, vectors }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        dense::conjugate_diagonal(self.vectors.as_ref(), &fv)
    }

    /// `‖V diag(λ) V† − H‖_F`.
    pub fn residual(&self, h: MatRef<'_, c64>) -> f64 {
        (&self.apply(|x| x) - h).norm_l2()
    }
}

pub fn eigh(h: &HermitianOperator) -> Result<Spectrum, OpError> {
    let m = h.matrix();
    let finite = (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()));
    if !finite {
        return Err(OpError::Eigen);
    }
    Ok(Spectrum::of_hermitian(m))
}

/// Logarithm of a positive semidefinite operator; eigenvalues below `floor` are clamped to it.
pub fn matrix_log(p: &HermitianOperator, floor: f64) -> Result<HermitianOperator, OpError> {
    let spectrum = eigh(p)?;
    if spectrum.min() < -POSITIVITY_TOL {
        return Err(OpError::NotPositive {
            min_eigenvalue: spectrum.min(),
        });
    }
    let m = spectrum.apply(|x| x.max(floor).ln());
    Ok(HermitianOperator::from_raw(p.space().clone(), m))
}

/// `exp(H)` via the spectrum.
pub fn matrix_exp(h: &HermitianOperator) -> Result<HermitianOperator, OpError> {
    let spectrum = eigh(h)?;
    let m = spectrum.apply(f64::exp);
    Ok(HermitianOperator::from_raw(h.space().clone(), m))
}

fn log_on(
    p: &HermitianOperator,
    space: &SiteSpace,
) -> Result<HermitianOperator, OpError> {
    if p.frobenius_norm() == 0.0 {
        return Err(OpError::ZeroOperator);
    }
    matrix_log(&p.embed(space)?, LOG_FLOOR)
}

/// `A ⊙ B = exp(log A + log B)`; operands on different sites are first embedded into
/// their joint space (where `log I = 0`).
pub fn odot(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator, OpError> {
    odot_signed(a, b, 1.0)
}

/// `A ⊙ B⁻¹ = exp(log A − log B)`.
pub fn odot_inverse(
    a: &HermitianOperator,
    b: &HermitianOperator,
) -> Result<HermitianOperator, OpError> {
    odot_signed(a, b, -1.0)
}

fn odot_signed(
    a: &HermitianOperator,
    b: &HermitianOperator,
    sign: f64,
) -> Result<HermitianOperator, OpError> {
    let joint = a.space().union(b.space())?;
    let la = log_on(a, &joint)?;
    let lb = log_on(b, &joint)?;
    matrix_exp(&la.add_scaled(&lb, sign)?)
}
