//! Markov entropy decomposition: lower bounds on the free energy from locally
//! consistent cluster states.
//!
//! The Markov entropy `S_M = Σ_k S(k|M_k)` upper-bounds the entropy of any global
//! state, so minimizing `E − T·S_M` over cluster states that merely agree on their
//! overlaps gives `F_MED(T) ≤ F(T)`.

mod problem;
mod solver;
mod sweep;

use thiserror::Error;

use crate::lattice::{LatticeError, LatticeKind, LatticeModel, ModelSpec, Neighborhood, ShieldTemplate, TermAssignment};
use crate::opalg::OpError;

pub use problem::{
    free_energy_gradient, markov_free_energy, ClusterVariables, Constraint, EntropyTerm,
    FreeEnergyParts, MarkovProblem, MAX_CLUSTER_DIM,
};
pub use solver::{generator_gradient, minimize, MedResult, SolverConfig};
pub use sweep::{ground_energy_lower_bound, temperature_sweep, BoundSearch, GroundBound, SweepResult, SweepRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MedError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("shield/cluster mismatch: {0}")]
    ShieldMismatch(String),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("cluster dimension {dim} exceeds the limit {MAX_CLUSTER_DIM}")]
    TooLarge { dim: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OpError),
}

/// Translation-invariant MED at one temperature.
pub fn minimize_ti(
    kind: LatticeKind,
    model: &ModelSpec,
    template: &ShieldTemplate,
    t: f64,
    config: &SolverConfig,
) -> Result<MedResult, MedError> {
    let problem = MarkovProblem::translation_invariant(kind, model, template)?;
    minimize(&problem, t, config, None)
}

/// Finite-lattice MED at one temperature.
pub fn minimize_finite(
    lm: &LatticeModel,
    neighborhood: &Neighborhood,
    mode: TermAssignment,
    t: f64,
    config: &SolverConfig,
) -> Result<MedResult, MedError> {
    let problem = MarkovProblem::finite(lm, std::slice::from_ref(neighborhood), mode)?;
    minimize(&problem, t, config, None)
}

/// Minimizes the largest of several patch free energies sharing the same cluster states.
pub fn multi_patch_minimize(
    problem: &MarkovProblem,
    t: f64,
    config: &SolverConfig,
) -> Result<MedResult, MedError> {
    minimize(problem, t, config, None)
}
