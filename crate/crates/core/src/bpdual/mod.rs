//! Belief propagation on chains of overlapping clusters, the dual of the 1D Markov
//! entropy problem.
//!
//! Cluster `j` carries the belief `ρ_j ∝ Λ_j ⊙ m_{j+1→j} ⊙ m_{j−1→j}` with
//! `Λ_j = exp(−Ĥ_j/T)`. Messages are stored by their logarithms and normalized to
//! unit trace, so every `⊙` is a sum of logarithms followed by one exponential.

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{
    ti_cluster, Boundary, LatticeError, LatticeKind, LatticeModel, ModelSpec, ShieldTemplate,
};
use crate::opalg::{
    matrix_exp, matrix_log, sum_local_terms, trace_distance, vn_entropy, DensityMatrix,
    HermitianOperator, OpError, SiteSpace, LOG_FLOOR,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BpError {
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error("invalid BP config: {0}")]
    InvalidConfig(String),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("cluster index {index} out of range for {len} clusters")]
    BadCluster { index: usize, len: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OpError),
}

/// Whether the incoming message is divided back out of the outgoing one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRule {
    /// `m_{k→k−1} ∝ Tr_n(ρ_k) ⊙ m_{k−1→k}⁻¹`.
    Retained,
    /// `m_{k→k−1} ∝ Tr_n(Λ_k ⊙ m_{k+1→k})`; its fixed points are not consistent in general.
    Cancelled,
}

impl MessageRule {
    pub fn name(self) -> &'static str {
        match self {
            MessageRule::Retained => "retained",
            MessageRule::Cancelled => "cancelled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "retained" => Some(MessageRule::Retained),
            "cancelled" | "canceled" => Some(MessageRule::Cancelled),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BPConfig {
    /// Damping `α` in `log m ← (1−α) log m + α log m_new`.
    pub damping: f64,
    /// Largest trace-distance change of any message in one sweep.
    pub tol: f64,
    pub max_iterations: usize,
    pub rule: MessageRule,
}

impl Default for BPConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            max_iterations: 10_000,
            rule: MessageRule::Retained,
        }
    }
}

impl BPConfig {
    pub fn validate(&self) -> Result<(), BpError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(BpError::InvalidConfig(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(BpError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(BpError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `m_{k→k−1}`
    Left,
    /// `m_{k→k+1}`
    Right,
}

/// Unit-trace positive message, kept as `log m`.
#[derive(Clone, Debug)]
pub struct Message {
    pub direction: Direction,
    log: HermitianOperator,
}

impl Message {
    /// The maximally mixed message.
    pub fn uniform(direction: Direction, space: SiteSpace) -> Self {
        let d = space.dim() as f64;
        Self {
            direction,
            log: HermitianOperator::identity(space).scale(-d.ln()),
        }
    }

    /// Message with logarithm `log` (shifted to unit trace).
    pub fn from_log(direction: Direction, log: HermitianOperator) -> Result<Self, OpError> {
        Ok(Self {
            direction,
            log: normalize_log(log)?,
        })
    }

    /// Message proportional to the positive operator `m`.
    pub fn from_operator(direction: Direction, m: &HermitianOperator) -> Result<Self, OpError> {
        Self::from_log(direction, matrix_log(m, LOG_FLOOR)?)
    }

    pub fn log(&self) -> &HermitianOperator {
        &self.log
    }

    pub fn space(&self) -> &SiteSpace {
        self.log.space()
    }

    pub fn operator(&self) -> Result<HermitianOperator, OpError> {
        matrix_exp(&self.log)
    }
}

/// `L − ln Tr e^L`, computed with the largest eigenvalue factored out.
fn normalize_log(log: HermitianOperator) -> Result<HermitianOperator, OpError> {
    let values = log.eigh()?.values().to_vec();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_tr = top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    let shift = HermitianOperator::identity(log.space().clone());
    log.add_scaled(&shift, -ln_tr)
}

/// One cluster of the chain, its sites listed left to right.
#[derive(Clone, Debug)]
pub struct ChainCluster {
    pub space: SiteSpace,
    pub hamiltonian: HermitianOperator,
}

impl ChainCluster {
    fn first(&self) -> &[usize] {
        &self.space.labels()[..self.space.len() - 1]
    }

    fn last(&self) -> &[usize] {
        &self.space.labels()[1..]
    }
}

/// Clusters of `n + 1` consecutive sites, neighbours overlapping on `n` sites.
///
/// In the translation-invariant form there is one cluster on labels `0..=n`; the
/// message leaving it to the left lives on labels `0..n` and is read back on labels
/// `1..=n` as the message arriving from the right.
#[derive(Clone, Debug)]
pub struct ChainProblem {
    clusters: Vec<ChainCluster>,
    window: usize,
    n_sites: usize,
    translation_invariant: bool,
}

impl ChainProblem {
    /// Infinite chain with `n`-site messages.
    pub fn translation_invariant(model: &ModelSpec, n: usize) -> Result<Self, BpError> {
        if n == 0 {
            return Err(BpError::InvalidConfig("window must be at least 1".into()));
        }
        let c = ti_cluster(LatticeKind::TiChain, model, &ShieldTemplate::chain(n))?;
        // ti_cluster labels site (−i, 0) as i; relabel so labels increase to the right
        let left_to_right: Vec<usize> = (0..=n).rev().collect();
        let h = c.hamiltonian.partial_trace(&left_to_right)?;
        let hamiltonian = relabel(&h, (0..=n).collect())?;
        Ok(Self {
            clusters: vec![ChainCluster {
                space: hamiltonian.space().clone(),
                hamiltonian,
            }],
            window: n,
            n_sites: 1,
            translation_invariant: true,
        })
    }

    /// Open chain with clusters `{j, …, j+n}`; each term goes to the cluster ending at its
    /// rightmost site, or to the first cluster.
    pub fn open_chain(lm: &LatticeModel, n: usize) -> Result<Self, BpError> {
        let spec = lm.lattice.spec();
        if spec.kind != LatticeKind::Chain || spec.boundary != Boundary::Open {
            return Err(BpError::Unsupported(
                "finite belief propagation needs an open chain".into(),
            ));
        }
        let n_sites = lm.lattice.n_sites();
        if n == 0 || n >= n_sites {
            return Err(BpError::InvalidConfig(format!(
                "window {n} must lie in 1..{n_sites}"
            )));
        }
        let m = n_sites - n;
        let mut hosted: Vec<Vec<(&HermitianOperator, f64)>> = vec![Vec::new(); m];
        for term in &lm.terms {
            let right = *term.support.iter().max().expect("terms have support");
            let left = *term.support.iter().min().expect("terms have support");
            let host = right.saturating_sub(n);
            if left < host {
                return Err(BpError::Unsupported(format!(
                    "term on {:?} spans more than {} sites",
                    term.support,
                    n + 1
                )));
            }
            hosted[host].push((&term.operator, term.weight));
        }
        let clusters = hosted
            .into_iter()
            .enumerate()
            .map(|(j, terms)| {
                let space = SiteSpace::qubits(j..=j + n);
                let hamiltonian = sum_local_terms(&space, terms)?;
                Ok(ChainCluster { space, hamiltonian })
            })
            .collect::<Result<Vec<_>, OpError>>()?;
        Ok(Self {
            clusters,
            window: n,
            n_sites,
            translation_invariant: false,
        })
    }

    pub fn clusters(&self) -> &[ChainCluster] {
        &self.clusters
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    /// Sites per unit of free energy (1 for the infinite chain).
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Message space between clusters `j − 1` and `j`.
    fn edge_space(&self, j: usize) -> SiteSpace {
        if self.translation_invariant {
            SiteSpace::qubits(0..self.window)
        } else {
            SiteSpace::qubits(j..j + self.window)
        }
    }

    fn n_edges(&self) -> usize {
        if self.translation_invariant {
            1
        } else {
            self.clusters.len() - 1
        }
    }
}

fn relabel(op: &HermitianOperator, labels: Vec<usize>) -> Result<HermitianOperator, OpError> {
    let space = SiteSpace::new(labels, op.space().dims().to_vec())?;
    Ok(HermitianOperator::from_raw(space, op.matrix().to_owned()))
}

/// Messages on every edge plus convergence bookkeeping.
///
/// Edge `e` joins clusters `e` and `e + 1` (for the infinite chain, a cluster and its
/// translate); `to_left[e]` is `m_{e+1→e}` and `to_right[e]` is `m_{e→e+1}`.
#[derive(Clone, Debug)]
pub struct BPState {
    pub to_left: Vec<Message>,
    pub to_right: Vec<Message>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub temperature: f64,
}

impl BPState {
    pub fn uniform(problem: &ChainProblem, t: f64) -> Self {
        let edges: Vec<SiteSpace> = (0..problem.n_edges()).map(|e| problem.edge_space(e + 1)).collect();
        Self {
            to_left: edges.iter().map(|s| Message::uniform(Direction::Left, s.clone())).collect(),
            to_right: edges.iter().map(|s| Message::uniform(Direction::Right, s.clone())).collect(),
            iterations: 0,
            residual: f64::INFINITY,
            converged: false,
            temperature: t,
        }
    }
}

/// `log m_{j+1→j}` on cluster `j`'s last sites, or `None` for the right end.
fn incoming_from_right(
    problem: &ChainProblem,
    state: &BPState,
    j: usize,
) -> Result<Option<HermitianOperator>, OpError> {
    if problem.translation_invariant {
        let log = state.to_left[0].log();
        let labels = log.space().labels().iter().map(|l| l + 1).collect();
        return relabel(log, labels).map(Some);
    }
    Ok(state.to_left.get(j).map(|m| m.log().clone()))
}

/// `log m_{j−1→j}` on cluster `j`'s first sites, or `None` for the left end.
fn incoming_from_left(problem: &ChainProblem, state: &BPState, j: usize) -> Option<HermitianOperator> {
    if problem.translation_invariant {
        return Some(state.to_right[0].log().clone());
    }
    j.checked_sub(1).map(|e| state.to_right[e].log().clone())
}

/// `log(Λ_j ⊙ m_a ⊙ m_b)` up to normalization.
fn exponent(
    cluster: &ChainCluster,
    t: f64,
    parts: &[Option<&HermitianOperator>],
) -> Result<HermitianOperator, OpError> {
    let mut terms: Vec<(&HermitianOperator, f64)> = vec![(&cluster.hamiltonian, -1.0 / t)];
    terms.extend(parts.iter().flatten().map(|p| (*p, 1.0)));
    sum_local_terms(&cluster.space, terms)
}

fn gibbs_of(exponent: &HermitianOperator) -> Result<DensityMatrix, OpError> {
    let log = normalize_log(exponent.clone())?;
    Ok(DensityMatrix::from_raw(matrix_exp(&log)?))
}

fn belief(
    problem: &ChainProblem,
    state: &BPState,
    j: usize,
) -> Result<DensityMatrix, OpError> {
    let a = incoming_from_right(problem, state, j)?;
    let b = incoming_from_left(problem, state, j);
    gibbs_of(&exponent(&problem.clusters[j], state.temperature, &[a.as_ref(), b.as_ref()])?)
}

/// New (undamped) messages leaving cluster `j`: `(to the left, to the right)`,
/// each `None` at a chain end.
pub fn bp_update(
    problem: &ChainProblem,
    state: &BPState,
    j: usize,
    rule: MessageRule,
) -> Result<(Option<Message>, Option<Message>), BpError> {
    let len = problem.clusters.len();
    if j >= len {
        return Err(BpError::BadCluster { index: j, len });
    }
    let cluster = &problem.clusters[j];
    let t = state.temperature;
    let a = incoming_from_right(problem, state, j)?;
    let b = incoming_from_left(problem, state, j);
    let sends_left = problem.translation_invariant || j > 0;
    let sends_right = problem.translation_invariant || j + 1 < len;

    let out = match rule {
        MessageRule::Retained => {
            let rho = gibbs_of(&exponent(cluster, t, &[a.as_ref(), b.as_ref()])?)?;
            let left = if sends_left {
                let m = matrix_log(rho.partial_trace(cluster.first())?.as_operator(), LOG_FLOOR)?;
                Some(match &b {
                    Some(b) => m.add_scaled(b, -1.0)?,
                    None => m,
                })
            } else {
                None
            };
            let right = if sends_right {
                let m = matrix_log(rho.partial_trace(cluster.last())?.as_operator(), LOG_FLOOR)?;
                Some(match &a {
                    Some(a) => m.add_scaled(a, -1.0)?,
                    None => m,
                })
            } else {
                None
            };
            (left, right)
        }
        MessageRule::Cancelled => {
            let left = if sends_left {
                let rho = gibbs_of(&exponent(cluster, t, &[a.as_ref()])?)?;
                Some(matrix_log(rho.partial_trace(cluster.first())?.as_operator(), LOG_FLOOR)?)
            } else {
                None
            };
            let right = if sends_right {
                let rho = gibbs_of(&exponent(cluster, t, &[b.as_ref()])?)?;
                Some(matrix_log(rho.partial_trace(cluster.last())?.as_operator(), LOG_FLOOR)?)
            } else {
                None
            };
            (left, right)
        }
    };

    let left = match out.0 {
        Some(m) => Some(Message::from_log(Direction::Left, m)?),
        None => None,
    };
    let right = match out.1 {
        Some(m) => {
            let m = if problem.translation_invariant {
                let labels = m.space().labels().iter().map(|l| l - 1).collect();
                relabel(&m, labels)?
            } else {
                m
            };
            Some(Message::from_log(Direction::Right, m)?)
        }
        None => None,
    };
    Ok((left, right))
}

/// Replaces `slot` by the damped update and returns the trace distance moved.
fn damp_into(slot: &mut Message, new: Message, alpha: f64) -> Result<f64, OpError> {
    let mixed = slot.log.scale(1.0 - alpha).add_scaled(&new.log, alpha)?;
    let next = Message::from_log(slot.direction, mixed)?;
    let change = trace_distance(&slot.operator()?, &next.operator()?)?;
    *slot = next;
    Ok(change)
}

/// Iterates to a fixed point from uniform messages.
///
/// The infinite chain updates both messages of its single cluster at once; finite
/// chains alternate a left-to-right sweep of rightward messages with a right-to-left
/// sweep of leftward ones.
pub fn bp_fixed_point(problem: &ChainProblem, t: f64, config: &BPConfig) -> Result<BPState, BpError> {
    config.validate()?;
    if !(t > 0.0) || t.is_nan() {
        return Err(BpError::BadTemperature(t));
    }
    let mut state = BPState::uniform(problem, t);
    let len = problem.clusters.len();
    for it in 1..=config.max_iterations {
        let mut residual: f64 = 0.0;
        if problem.translation_invariant {
            let (left, right) = bp_update(problem, &state, 0, config.rule)?;
            let (left, right) = (left.expect("ti sends left"), right.expect("ti sends right"));
            residual = residual.max(damp_into(&mut state.to_left[0], left, config.damping)?);
            residual = residual.max(damp_into(&mut state.to_right[0], right, config.damping)?);
        } else {
            for j in 0..len - 1 {
                let (_, right) = bp_update(problem, &state, j, config.rule)?;
                let right = right.expect("inner cluster sends right");
                residual = residual.max(damp_into(&mut state.to_right[j], right, config.damping)?);
            }
            for j in (1..len).rev() {
                let (left, _) = bp_update(problem, &state, j, config.rule)?;
                let left = left.expect("inner cluster sends left");
                residual = residual.max(damp_into(&mut state.to_left[j - 1], left, config.damping)?);
            }
        }
        state.iterations = it;
        state.residual = residual;
        if residual <= config.tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Cluster beliefs and the overlap states `σ ∝ m_{j→j−1} ⊙ m_{j−1→j}`.
#[derive(Clone, Debug)]
pub struct Beliefs {
    pub clusters: Vec<DensityMatrix>,
    pub overlaps: Vec<DensityMatrix>,
}

pub fn beliefs_from_messages(problem: &ChainProblem, state: &BPState) -> Result<Beliefs, BpError> {
    let clusters = (0..problem.clusters.len())
        .map(|j| belief(problem, state, j))
        .collect::<Result<Vec<_>, _>>()?;
    let overlaps = state
        .to_left
        .iter()
        .zip(&state.to_right)
        .map(|(l, r)| gibbs_of(&l.log().add_scaled(r.log(), 1.0)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Beliefs { clusters, overlaps })
}

#[derive(Clone, Debug, Serialize)]
pub struct BpFreeEnergy {
    pub temperature: f64,
    /// Per site.
    pub free_energy: f64,
    pub energy: f64,
    pub markov_entropy: f64,
    /// Largest entry of `Tr ρ_j − σ` over every overlap.
    pub consistency: f64,
}

/// `E − T(Σ_j S(ρ_j) − Σ_edges S(σ))` at the beliefs, per site.
pub fn bp_free_energy(problem: &ChainProblem, beliefs: &Beliefs, t: f64) -> Result<BpFreeEnergy, BpError> {
    let mut energy = 0.0;
    let mut entropy = 0.0;
    for (c, rho) in problem.clusters.iter().zip(&beliefs.clusters) {
        energy += rho.expectation(&c.hamiltonian)?;
        entropy += vn_entropy(rho);
    }
    for s in &beliefs.overlaps {
        entropy -= vn_entropy(s);
    }
    let mut consistency: f64 = 0.0;
    for (e, sigma) in beliefs.overlaps.iter().enumerate() {
        let (left, right) = if problem.translation_invariant {
            (&problem.clusters[0], &problem.clusters[0])
        } else {
            (&problem.clusters[e], &problem.clusters[e + 1])
        };
        let (lrho, rrho) = if problem.translation_invariant {
            (&beliefs.clusters[0], &beliefs.clusters[0])
        } else {
            (&beliefs.clusters[e], &beliefs.clusters[e + 1])
        };
        let from_left = lrho.partial_trace(left.last())?;
        let from_right = rrho.partial_trace(right.first())?;
        let from_left = relabel(from_left.as_operator(), sigma.space().labels().to_vec())?;
        let from_right = relabel(from_right.as_operator(), sigma.space().labels().to_vec())?;
        for m in [&from_left, &from_right] {
            let d = m.add_scaled(sigma.as_operator(), -1.0)?;
            let dm = d.matrix();
            for i in 0..dm.nrows() {
                for k in 0..dm.ncols() {
                    consistency = consistency.max(dm[(i, k)].norm());
                }
            }
        }
    }
    let n = problem.n_sites as f64;
    Ok(BpFreeEnergy {
        temperature: t,
        free_energy: (energy - t * entropy) / n,
        energy: energy / n,
        markov_entropy: entropy / n,
        consistency,
    })
}

/// Fixed point plus free energy in one call.
pub fn solve(problem: &ChainProblem, t: f64, config: &BPConfig) -> Result<(BPState, BpFreeEnergy), BpError> {
    let state = bp_fixed_point(problem, t, config)?;
    let beliefs = beliefs_from_messages(problem, &state)?;
    let f = bp_free_energy(problem, &beliefs, t)?;
    Ok((state, f))
}
