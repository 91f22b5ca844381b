use super::{DensityMatrix, OpError};

/// Eigenvalues at or below this contribute nothing to an entropy (`0 ln 0 = 0`).
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// `−Σ λ ln λ` over eigenvalues above [`ENTROPY_CUTOFF`].
pub fn entropy_of_eigenvalues(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Von Neumann entropy `−Tr ρ ln ρ` in nats.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    if rho.dim() == 1 {
        return 0.0;
    }
    match rho.eigenvalues() {
        Ok(values) => entropy_of_eigenvalues(&values),
        Err(_) => f64::NAN,
    }
}

fn marginal_entropy(rho: &DensityMatrix, keep: &[usize]) -> Result<f64, OpError> {
    if keep.is_empty() {
        return Ok(0.0);
    }
    if keep.len() == rho.space().len() {
        return Ok(vn_entropy(rho));
    }
    Ok(vn_entropy(&rho.partial_trace(keep)?))
}

/// `S(X|Y) = S(XY) − S(Y)` where `Y` is everything in `ρ`'s space outside `x`.
pub fn conditional_entropy(rho_xy: &DensityMatrix, x: &[usize]) -> Result<f64, OpError> {
    for (i, l) in x.iter().enumerate() {
        if !rho_xy.space().contains(*l) {
            return Err(OpError::UnknownSite(*l));
        }
        if x[..i].contains(l) {
            return Err(OpError::DuplicateSite(*l));
        }
    }
    if x.len() >= rho_xy.space().len() {
        return Err(OpError::InvalidPartition(
            "conditioned region must be a strict subset".into(),
        ));
    }
    let y = rho_xy.space().complement(x);
    Ok(vn_entropy(rho_xy) - marginal_entropy(rho_xy, &y)?)
}

/// `I(A;C|B) = S(AB) + S(BC) − S(B) − S(ABC)`; the three parts must partition `ρ`'s sites.
pub fn cmi(rho: &DensityMatrix, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64, OpError> {
    let space = rho.space();
    let all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    for (i, l) in all.iter().enumerate() {
        if all[..i].contains(l) {
            return Err(OpError::InvalidPartition(format!("site {l} is in two parts")));
        }
        if !space.contains(*l) {
            return Err(OpError::UnknownSite(*l));
        }
    }
    if all.len() != space.len() {
        return Err(OpError::InvalidPartition("parts do not cover the state".into()));
    }
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let bc: Vec<usize> = b.iter().chain(c).copied().collect();
    Ok(marginal_entropy(rho, &ab)? + marginal_entropy(rho, &bc)?
        - marginal_entropy(rho, b)?
        - vn_entropy(rho))
}
