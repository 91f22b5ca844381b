use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::opalg::{dense, HermitianOperator, SiteSpace};

/// Spin models with nearest-neighbor couplings (S = σ/2 for Heisenberg).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `J S_i·S_j − h S^z` style; antiferromagnetic for `J > 0`.
    Heisenberg,
    /// `−J σᶻσᶻ − h σᶻ`, diagonal in the computational basis.
    ClassicalIsing,
    /// `−J σᶻσᶻ − g σˣ`.
    Tfim,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::ClassicalIsing => "classical_ising",
            ModelKind::Tfim => "tfim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "heisenberg" => Some(ModelKind::Heisenberg),
            "classical_ising" | "ising" => Some(ModelKind::ClassicalIsing),
            "tfim" => Some(ModelKind::Tfim),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Bond coupling `J`.
    pub coupling: f64,
    /// Single-site field: longitudinal `h` for Ising and Heisenberg (on `σᶻ`), transverse `g` for TFIM.
    pub field: f64,
}

impl ModelSpec {
    pub fn heisenberg(coupling: f64) -> Self {
        Self {
            kind: ModelKind::Heisenberg,
            coupling,
            field: 0.0,
        }
    }

    pub fn classical_ising(coupling: f64, field: f64) -> Self {
        Self {
            kind: ModelKind::ClassicalIsing,
            coupling,
            field,
        }
    }

    pub fn tfim(coupling: f64, field: f64) -> Self {
        Self {
            kind: ModelKind::Tfim,
            coupling,
            field,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coupling.is_finite() && self.field.is_finite()
    }

    /// True when every term is diagonal in the computational basis.
    pub fn is_classical(&self) -> bool {
        match self.kind {
            ModelKind::ClassicalIsing => true,
            ModelKind::Tfim => self.field == 0.0,
            ModelKind::Heisenberg => false,
        }
    }

    pub fn has_field(&self) -> bool {
        self.field != 0.0
    }
}

pub(crate) fn pauli_x() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| if i != j { dense::ONE } else { dense::ZERO })
}

pub(crate) fn pauli_y() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c64::new(0.0, -1.0),
        (1, 0) => c64::new(0.0, 1.0),
        _ => dense::ZERO,
    })
}

pub(crate) fn pauli_z() -> Mat<c64> {
    dense::diagonal(&[1.0, -1.0])
}

/// Operator of the model on `support`: a bond coupling for two sites, the field for one.
///
/// Supports are always spin-½ sites.
pub fn model_term(model: &ModelSpec, support: &[usize]) -> HermitianOperator {
    let space = SiteSpace::qubits(support.iter().copied());
    match support.len() {
        1 => {
            let m = match model.kind {
                ModelKind::Heisenberg => dense::scaled(pauli_z().as_ref(), -0.5 * model.field),
                ModelKind::ClassicalIsing => dense::scaled(pauli_z().as_ref(), -model.field),
                ModelKind::Tfim => dense::scaled(pauli_x().as_ref(), -model.field),
            };
            HermitianOperator::from_raw(space, m)
        }
        2 => {
            let zz = dense::kron(pauli_z().as_ref(), pauli_z().as_ref());
            let m = match model.kind {
                ModelKind::Heisenberg => {
                    let mut acc = zz;
                    acc += dense::kron(pauli_x().as_ref(), pauli_x().as_ref());
                    acc += dense::kron(pauli_y().as_ref(), pauli_y().as_ref());
                    dense::scaled(acc.as_ref(), 0.25 * model.coupling)
                }
                ModelKind::ClassicalIsing | ModelKind::Tfim => {
                    dense::scaled(zz.as_ref(), -model.coupling)
                }
            };
            HermitianOperator::from_raw(space, m)
        }
        n => panic!("model terms act on one or two sites, got {n}"),
    }
}
