//! Random states and operators for tests, examples and property checks.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dense, DensityMatrix, HermitianOperator, SiteSpace};

fn gaussian(rng: &mut impl Rng) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Density matrix obtained by tracing out a `rank`-dimensional ancilla from a
/// Haar-random pure state (induced measure).
pub fn random_density_matrix(space: &SiteSpace, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let n = space.dim();
    let rank = rank.max(1);
    let g = Mat::from_fn(n, rank, |_, _| gaussian(rng));
    let w = &g * g.adjoint();
    let t = dense::trace(w.as_ref()).re;
    let m = dense::scaled(w.as_ref(), 1.0 / t);
    DensityMatrix::from_raw(HermitianOperator::from_raw(space.clone(), m))
}

/// Haar-random pure state vector.
pub fn random_pure_vector(dim: usize, rng: &mut impl Rng) -> Vec<c64> {
    let v: Vec<c64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// GUE-distributed Hermitian operator (unit-variance entries).
pub fn random_hermitian(space: &SiteSpace, rng: &mut impl Rng) -> HermitianOperator {
    let n = space.dim();
    let g = Mat::from_fn(n, n, |_, _| gaussian(rng));
    HermitianOperator::from_raw(space.clone(), dense::hermitian_part(g.as_ref()))
}

/// Random probability vector of length `n` with entries bounded away from zero.
pub fn random_distribution(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}
