//! Augmented-Lagrangian minimization in exponential coordinates `ρ = e^G / Tr e^G`.
//!
//! The inner loop is preconditioned Polak–Ribière nonlinear CG with a strong-Wolfe
//! line search. The preconditioned gradient is the centered ρ-space gradient, which
//! the Daleckiĭ–Kreĭn map sends to the true gradient in `G`.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::problem::{Compiled, FreeEnergyParts};
use super::{ClusterVariables, MarkovProblem, MedError};
use crate::opalg::random::random_hermitian;
use crate::opalg::{dense, DensityMatrix, HermitianOperator, Spectrum, LOG_FLOOR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_gradient: f64,
    pub tol_constraint: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub seed: u64,
    /// Scale of the random Hermitian added to the initial generators (0 = maximally mixed start).
    pub init_noise: f64,
    /// Warm-start each temperature from the previous optimum in sweeps.
    pub warm_start: bool,
    /// Project iterates onto states invariant under flipping every spin.
    pub spin_flip_symmetry: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gradient: 1e-6,
            tol_constraint: 1e-6,
            max_outer: 50,
            max_inner: 500,
            penalty_init: 1.0,
            penalty_growth: 2.0,
            seed: 0,
            init_noise: 0.0,
            warm_start: true,
            spin_flip_symmetry: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), MedError> {
        let positive = [
            ("tol_gradient", self.tol_gradient),
            ("tol_constraint", self.tol_constraint),
            ("penalty_init", self.penalty_init),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MedError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(MedError::InvalidConfig("penalty_growth must exceed 1".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(MedError::InvalidConfig("iteration limits must be positive".into()));
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return Err(MedError::InvalidConfig("init_noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Outcome of one minimization. Energies and entropies are per site.
#[derive(Clone, Debug)]
pub struct MedResult {
    pub temperature: f64,
    /// Largest patch free energy (the single free energy with one patch).
    pub free_energy: f64,
    pub energy: f64,
    /// Markov entropy of the patch attaining the maximum.
    pub markov_entropy: f64,
    pub patch_free_energies: Vec<f64>,
    pub residual: f64,
    /// Inner (CG) iterations over all outer rounds.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub variables: ClusterVariables,
    pub generators: Vec<HermitianOperator>,
    /// Augmented objective after each accepted step of the final inner solve.
    pub last_inner_trace: Vec<f64>,
}

impl MedResult {
    /// "converged", or "unverified" when the constraint residual or stationarity test failed.
    pub fn status(&self) -> &'static str {
        if self.converged {
            "converged"
        } else {
            "unverified"
        }
    }
}

#[derive(Clone, Debug)]
struct Point {
    gens: Vec<Mat<c64>>,
    t: f64,
}

impl Point {
    fn dot(&self, other: &Point) -> f64 {
        self.gens
            .iter()
            .zip(&other.gens)
            .map(|(a, b)| dense::inner(a.as_ref(), b.as_ref()))
            .sum::<f64>()
            + self.t * other.t
    }

    fn step(&self, alpha: f64, d: &Point) -> Point {
        let gens = self
            .gens
            .iter()
            .zip(&d.gens)
            .map(|(a, b)| {
                let mut m = a.clone();
                dense::axpy(&mut m, alpha, b.as_ref());
                m
            })
            .collect();
        Point {
            gens,
            t: self.t + alpha * d.t,
        }
    }

    fn scaled(&self, s: f64) -> Point {
        Point {
            gens: self.gens.iter().map(|g| dense::scaled(g.as_ref(), s)).collect(),
            t: self.t * s,
        }
    }

    fn negated_plus(&self, beta: f64, d: &Point) -> Point {
        // −self + β d
        self.scaled(-1.0).step(beta, d)
    }
}

struct Multipliers {
    constraint: Vec<Mat<c64>>,
    patch: Vec<f64>,
    mu: f64,
}

struct Eval {
    value: f64,
    g: Point,
    z: Point,
    /// Unscaled (total) energy, entropies and free energies.
    parts: FreeEnergyParts,
    constraints: Vec<Mat<c64>>,
    states: Vec<Mat<c64>>,
}

struct Engine<'a> {
    problem: &'a MarkovProblem,
    compiled: Compiled,
    t: f64,
    scale: f64,
    symmetric: bool,
}

fn flip(m: &Mat<c64>) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)])
}

fn symmetrize(m: &mut Mat<c64>) {
    let f = flip(m);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] = (m[(i, j)] + f[(i, j)]) * 0.5;
        }
    }
}

/// Daleckiĭ–Kreĭn divided difference of `x ↦ e^x / Z` at two eigenvalues.
fn dk_kernel(gi: f64, gj: f64, pi: f64, pj: f64) -> f64 {
    let (delta, p_hi) = if gi >= gj { (gi - gj, pi) } else { (gj - gi, pj) };
    if delta < 1e-10 {
        p_hi * (1.0 - 0.5 * delta)
    } else {
        p_hi * (-(-delta).exp_m1()) / delta
    }
}

impl<'a> Engine<'a> {
    fn new(problem: &'a MarkovProblem, t: f64, config: &SolverConfig) -> Result<Self, MedError> {
        if config.spin_flip_symmetry {
            for (v, h) in problem.hamiltonians().iter().enumerate() {
                let m = h.matrix().to_owned();
                if (&flip(&m) - &m).norm_l2() > 1e-12 * m.norm_l2().max(1.0) {
                    return Err(MedError::InvalidConfig(format!(
                        "spin-flip symmetry requested but Hamiltonian {v} is not flip invariant"
                    )));
                }
            }
        }
        Ok(Self {
            problem,
            compiled: problem.compile()?,
            t,
            scale: 1.0 / problem.sites_per_unit(),
            symmetric: config.spin_flip_symmetry,
        })
    }

    fn multi(&self) -> bool {
        self.compiled.n_patches > 1
    }

    fn evaluate(&self, x: &Point, mult: &Multipliers) -> Eval {
        let problem = self.problem;
        let t = self.t;
        let nvar = x.gens.len();
        let mut spectra = Vec::with_capacity(nvar);
        let mut probs = Vec::with_capacity(nvar);
        let mut logp = Vec::with_capacity(nvar);
        let mut states = Vec::with_capacity(nvar);
        for g in &x.gens {
            let s = Spectrum::of_hermitian(g.as_ref());
            let top = s.max();
            let w: Vec<f64> = s.values().iter().map(|&v| (v - top).exp()).collect();
            let z: f64 = w.iter().sum();
            let lnz = z.ln();
            let p: Vec<f64> = w.iter().map(|x| x / z).collect();
            let lp: Vec<f64> = s.values().iter().map(|&v| v - top - lnz).collect();
            states.push(dense::conjugate_diagonal(s.vectors(), &p));
            spectra.push(s);
            probs.push(p);
            logp.push(lp);
        }

        let energy_v: Vec<f64> = states
            .iter()
            .zip(problem.hamiltonians())
            .map(|(r, h)| dense::trace_product(r.as_ref(), h.matrix()))
            .collect();
        let energy: f64 = energy_v.iter().sum();

        // per term: entropy contribution and the logs to embed
        struct TermLogs {
            cluster: Option<Mat<c64>>,
            shield: Option<Mat<c64>>,
        }
        let mut entropy = vec![0.0; self.compiled.n_patches];
        let mut logs = Vec::with_capacity(self.compiled.entropy.len());
        for term in &self.compiled.entropy {
            let v = term.variable;
            let (sc, lc) = match &term.cluster {
                Some(split) => {
                    let (l, s) = log_entropy(&split.trace_out(states[v].as_ref()));
                    (s, Some(l))
                }
                None => {
                    let s: f64 = probs[v]
                        .iter()
                        .zip(&logp[v])
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, l)| -p * l)
                        .sum();
                    (s, None)
                }
            };
            let (sm, lm) = match &term.shield {
                Some(split) => {
                    let (l, s) = log_entropy(&split.trace_out(states[v].as_ref()));
                    (s, Some(l))
                }
                None => (0.0, None),
            };
            entropy[term.patch] += term.weight * (sc - sm);
            logs.push(TermLogs {
                cluster: lc,
                shield: lm,
            });
        }
        let free: Vec<f64> = entropy.iter().map(|s| energy - t * s).collect();

        let mut residual: f64 = 0.0;
        let mut cvals = Vec::with_capacity(self.compiled.constraints.len());
        for (a, sa, b, sb) in &self.compiled.constraints {
            let c = sa.trace_out(states[*a].as_ref()) - sb.trace_out(states[*b].as_ref());
            residual = residual.max(dense::max_abs(c.as_ref()));
            cvals.push(c);
        }

        // objective and patch weights a_p = ∂L/∂f^p
        let mut value;
        let weights: Vec<f64>;
        let mut gt = 0.0;
        if self.multi() {
            value = x.t;
            weights = free
                .iter()
                .zip(&mult.patch)
                .map(|(f, l)| (l + mult.mu * (f * self.scale - x.t)).max(0.0))
                .collect();
            for (a, l) in weights.iter().zip(&mult.patch) {
                value += (a * a - l * l) / (2.0 * mult.mu);
            }
            gt = 1.0 - weights.iter().sum::<f64>();
        } else {
            value = free[0] * self.scale;
            weights = vec![1.0];
        }
        for (c, lam) in cvals.iter().zip(&mult.constraint) {
            value += dense::inner(lam.as_ref(), c.as_ref()) + 0.5 * mult.mu * dense::inner(c.as_ref(), c.as_ref());
        }

        let total_weight: f64 = weights.iter().sum();
        let mut phi: Vec<Mat<c64>> = problem
            .hamiltonians()
            .iter()
            .map(|h| dense::scaled(h.matrix(), total_weight * self.scale))
            .collect();
        for (term, l) in self.compiled.entropy.iter().zip(&logs) {
            let s = weights[term.patch] * self.scale * t * term.weight;
            if s == 0.0 {
                continue;
            }
            let v = term.variable;
            match (&term.cluster, &l.cluster) {
                (Some(split), Some(lc)) => split.embed_add(&mut phi[v], lc.as_ref(), s),
                _ => {
                    let lr = dense::conjugate_diagonal(spectra[v].vectors(), &logp[v]);
                    dense::axpy(&mut phi[v], s, lr.as_ref());
                }
            }
            if let (Some(split), Some(lm)) = (&term.shield, &l.shield) {
                split.embed_add(&mut phi[v], lm.as_ref(), -s);
            }
        }
        for (((a, sa, b, sb), c), lam) in self.compiled.constraints.iter().zip(&cvals).zip(&mult.constraint) {
            let mut y = lam.clone();
            dense::axpy(&mut y, mult.mu, c.as_ref());
            sa.embed_add(&mut phi[*a], y.as_ref(), 1.0);
            sb.embed_add(&mut phi[*b], y.as_ref(), -1.0);
        }

        let mut zs = Vec::with_capacity(nvar);
        let mut gs = Vec::with_capacity(nvar);
        for v in 0..nvar {
            let mut z = dense::hermitian_part(phi[v].as_ref());
            let mean = dense::trace_product(states[v].as_ref(), z.as_ref());
            dense::shift_diagonal(&mut z, mean);
            let vecs = spectra[v].vectors();
            let gv = spectra[v].values();
            let p = &probs[v];
            let zt = vecs.adjoint() * &z * vecs;
            let n = gv.len();
            let kz = Mat::from_fn(n, n, |i, j| zt[(i, j)] * dk_kernel(gv[i], gv[j], p[i], p[j]));
            let mut g = dense::hermitian_part((vecs * &kz * vecs.adjoint()).as_ref());
            if self.symmetric {
                symmetrize(&mut z);
                symmetrize(&mut g);
            }
            zs.push(z);
            gs.push(g);
        }

        Eval {
            value,
            g: Point { gens: gs, t: gt },
            z: Point { gens: zs, t: gt },
            parts: FreeEnergyParts {
                temperature: t,
                energy,
                markov_entropy: entropy,
                free_energy: free,
                residual,
            },
            constraints: cvals,
            states,
        }
    }
}

fn log_entropy(m: &Mat<c64>) -> (Mat<c64>, f64) {
    let s = Spectrum::of_hermitian(m.as_ref());
    let logs: Vec<f64> = s.values().iter().map(|&x| x.max(LOG_FLOOR).ln()).collect();
    let ent = crate::opalg::entropy_of_eigenvalues(s.values());
    (dense::conjugate_diagonal(s.vectors(), &logs), ent)
}

const C1: f64 = 1e-4;
const C2: f64 = 0.1;

/// Strong-Wolfe search along `d` by expansion, then safeguarded secant zoom on `φ'`.
/// Returns `None` when no point with sufficient decrease was found.
fn line_search(
    engine: &Engine<'_>,
    mult: &Multipliers,
    x: &Point,
    d: &Point,
    f0: f64,
    slope0: f64,
    t0: f64,
) -> Option<(f64, Eval)> {
    let mut lo = 0.0;
    let mut dlo = slope0;
    let mut hi: Option<(f64, f64)> = None;
    let mut best: Option<(f64, Eval)> = None;
    let mut t = t0;
    for _ in 0..60 {
        let e = engine.evaluate(&x.step(t, d), mult);
        let dphi = e.g.dot(d);
        let armijo = e.value.is_finite() && e.value <= f0 + C1 * t * slope0;
        if !armijo {
            hi = Some((t, dphi));
        } else if dphi.abs() <= -C2 * slope0 {
            return Some((t, e));
        } else if dphi > 0.0 {
            hi = Some((t, dphi));
            best = Some((t, e));
        } else {
            lo = t;
            dlo = dphi;
            best = Some((t, e));
        }
        let Some((th, dhi)) = hi else {
            t *= 2.0;
            continue;
        };
        let width = th - lo;
        if width <= 1e-15 * th.max(1e-300) {
            break;
        }
        let secant = if dhi.is_finite() && dhi > 0.0 && dlo < 0.0 {
            lo - dlo * width / (dhi - dlo)
        } else {
            f64::NAN
        };
        t = if secant > lo + 0.1 * width && secant < th - 0.1 * width {
            secant
        } else {
            0.5 * (lo + th)
        };
    }
    best
}

struct InnerOutcome {
    x: Point,
    eval: Eval,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn inner_solve(
    engine: &Engine<'_>,
    mult: &Multipliers,
    x0: Point,
    max_inner: usize,
    tol: f64,
    step0: f64,
) -> InnerOutcome {
    let mut x = x0;
    let mut e = engine.evaluate(&x, mult);
    let mut d = e.z.scaled(-1.0);
    let mut step = step0;
    let mut trace = vec![e.value];
    let mut converged = false;
    let mut iterations = 0;
    let mut restarted = false;
    while iterations < max_inner {
        let gz = e.g.dot(&e.z);
        if gz.max(0.0).sqrt() < tol {
            converged = true;
            break;
        }
        let mut slope = e.g.dot(&d);
        if !(slope < 0.0) {
            d = e.z.scaled(-1.0);
            slope = -gz;
        }
        match line_search(engine, mult, &x, &d, e.value, slope, step) {
            Some((alpha, next)) => {
                iterations += 1;
                restarted = false;
                x = x.step(alpha, &d);
                let denom = e.z.dot(&e.g);
                let mut diff = next.g.clone();
                for (a, b) in diff.gens.iter_mut().zip(&e.g.gens) {
                    dense::axpy(a, -1.0, b.as_ref());
                }
                diff.t -= e.g.t;
                let beta = if denom > 0.0 { (next.z.dot(&diff) / denom).max(0.0) } else { 0.0 };
                d = next.z.negated_plus(beta, &d);
                step = alpha;
                e = next;
                trace.push(e.value);
            }
            None => {
                if restarted {
                    break;
                }
                // retry once along the preconditioned steepest-descent direction
                restarted = true;
                d = e.z.scaled(-1.0);
                step = step.min(step0);
            }
        }
    }
    if !converged && e.g.dot(&e.z).max(0.0).sqrt() < tol {
        converged = true;
    }
    InnerOutcome {
        x,
        eval: e,
        iterations,
        converged,
        trace,
    }
}

fn initial_point(
    problem: &MarkovProblem,
    config: &SolverConfig,
    warm: Option<&[HermitianOperator]>,
) -> Result<Point, MedError> {
    let gens: Vec<Mat<c64>> = match warm {
        Some(w) => {
            if w.len() != problem.variables().len()
                || w.iter().zip(problem.variables()).any(|(g, v)| g.space() != v)
            {
                return Err(MedError::InvalidProblem(
                    "warm-start generators do not match the problem".into(),
                ));
            }
            w.iter().map(|g| g.matrix().to_owned()).collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            problem
                .variables()
                .iter()
                .map(|v| {
                    if config.init_noise > 0.0 {
                        let h = random_hermitian(v, &mut rng);
                        let mut m = dense::scaled(h.matrix(), config.init_noise);
                        if config.spin_flip_symmetry {
                            symmetrize(&mut m);
                        }
                        m
                    } else {
                        Mat::zeros(v.dim(), v.dim())
                    }
                })
                .collect()
        }
    };
    Ok(Point { gens, t: 0.0 })
}

/// Minimizes the Markov free energy (the largest patch free energy with several
/// patches) at temperature `t > 0`, optionally warm-started from generators `G`.
pub fn minimize(
    problem: &MarkovProblem,
    t: f64,
    config: &SolverConfig,
    warm: Option<&[HermitianOperator]>,
) -> Result<MedResult, MedError> {
    config.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(MedError::BadTemperature(t));
    }
    let engine = Engine::new(problem, t, config)?;
    let mut x = initial_point(problem, config, warm)?;
    let npatch = problem.patches().len();
    let mut mult = Multipliers {
        constraint: engine
            .compiled
            .constraints
            .iter()
            .map(|(_, s, _, _)| Mat::zeros(s.keep_dim(), s.keep_dim()))
            .collect(),
        patch: vec![1.0 / npatch as f64; npatch],
        mu: config.penalty_init,
    };
    if engine.multi() {
        let e = engine.evaluate(&x, &mult);
        x.t = e.parts.max_free_energy() * engine.scale;
    }

    let mut total_iters = 0;
    let mut prev_violation = f64::INFINITY;
    let mut outcome = None;
    let mut converged = false;
    let mut outer = 0;
    let step0 = 1.0 / t.max(1e-3);
    while outer < config.max_outer {
        outer += 1;
        let o = inner_solve(&engine, &mult, x, config.max_inner, config.tol_gradient, step0);
        total_iters += o.iterations;
        x = o.x.clone();
        let residual = o.eval.parts.residual;
        let mut patch_violation: f64 = 0.0;
        if engine.multi() {
            for (f, l) in o.eval.parts.free_energy.iter().zip(&mult.patch) {
                let slack = x.t - f * engine.scale;
                patch_violation = patch_violation.max(slack.min(l / mult.mu).abs());
            }
        }
        let violation = residual.max(patch_violation);
        if o.converged && violation <= config.tol_constraint {
            converged = true;
            outcome = Some(o);
            break;
        }
        for (lam, c) in mult.constraint.iter_mut().zip(&o.eval.constraints) {
            dense::axpy(lam, mult.mu, c.as_ref());
        }
        if engine.multi() {
            for (l, f) in mult.patch.iter_mut().zip(&o.eval.parts.free_energy) {
                *l = (*l + mult.mu * (f * engine.scale - x.t)).max(0.0);
            }
        }
        if violation > 0.25 * prev_violation {
            mult.mu *= config.penalty_growth;
        }
        prev_violation = violation;
        outcome = Some(o);
    }
    let o = outcome.expect("at least one outer iteration");
    Ok(assemble(problem, &engine, o, x, total_iters, outer, converged))
}

fn assemble(
    problem: &MarkovProblem,
    engine: &Engine<'_>,
    o: InnerOutcome,
    x: Point,
    iterations: usize,
    outer: usize,
    converged: bool,
) -> MedResult {
    let parts = &o.eval.parts;
    let n = problem.sites_per_unit();
    let (imax, fmax) = parts
        .free_energy
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, f)| if f > acc.1 { (i, f) } else { acc });
    let states = o
        .eval
        .states
        .into_iter()
        .zip(problem.variables())
        .map(|(m, v)| DensityMatrix::from_raw(HermitianOperator::from_raw(v.clone(), m)))
        .collect();
    let generators = x
        .gens
        .into_iter()
        .zip(problem.variables())
        .map(|(m, v)| HermitianOperator::from_raw(v.clone(), m))
        .collect();
    MedResult {
        temperature: engine.t,
        free_energy: fmax / n,
        energy: parts.energy / n,
        markov_entropy: parts.markov_entropy[imax] / n,
        patch_free_energies: parts.free_energy.iter().map(|f| f / n).collect(),
        residual: parts.residual,
        iterations,
        outer_iterations: outer,
        converged,
        variables: ClusterVariables::from_states_unchecked(states),
        generators,
        last_inner_trace: o.trace,
    }
}

/// Analytic gradient of the (per-site) Markov free energy of `patch` with respect to the
/// generators `G`, with the free energy itself. Used for finite-difference checks.
pub fn generator_gradient(
    problem: &MarkovProblem,
    generators: &[HermitianOperator],
    t: f64,
    patch: usize,
) -> Result<(f64, Vec<HermitianOperator>), MedError> {
    if patch >= problem.patches().len() {
        return Err(MedError::InvalidProblem(format!("no patch {patch}")));
    }
    let single = problem
        .clone()
        .with_patches(vec![problem.patches()[patch].clone()])?;
    let engine = Engine::new(&single, t, &SolverConfig::default())?;
    let x = initial_point(problem, &SolverConfig::default(), Some(generators))?;
    // zero multipliers and zero penalty leave the bare free energy
    let mult = Multipliers {
        constraint: engine
            .compiled
            .constraints
            .iter()
            .map(|(_, s, _, _)| Mat::zeros(s.keep_dim(), s.keep_dim()))
            .collect(),
        patch: vec![1.0],
        mu: 0.0,
    };
    let e = engine.evaluate(&x, &mult);
    let grads = e
        .g
        .gens
        .into_iter()
        .zip(problem.variables())
        .map(|(m, v)| HermitianOperator::from_raw(v.clone(), m))
        .collect();
    Ok((e.value, grads))
}
