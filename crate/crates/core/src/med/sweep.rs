use rayon::prelude::*;
use serde::Serialize;

use super::{minimize, MarkovProblem, MedError, MedResult, SolverConfig};

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub result: MedResult,
    /// `c = −T ∂²F/∂T²` from a second difference; `None` at the grid ends.
    pub specific_heat: Option<f64>,
}

/// One [`MedResult`] per temperature, ascending in `T`.
#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn temperatures(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.result.temperature).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.result.converged)
    }

    fn fill_specific_heat(&mut self) {
        let n = self.rows.len();
        for i in 0..n {
            self.rows[i].specific_heat = None;
        }
        for i in 1..n.saturating_sub(1) {
            let (t0, t1, t2) = (
                self.rows[i - 1].result.temperature,
                self.rows[i].result.temperature,
                self.rows[i + 1].result.temperature,
            );
            let (f0, f1, f2) = (
                self.rows[i - 1].result.free_energy,
                self.rows[i].result.free_energy,
                self.rows[i + 1].result.free_energy,
            );
            let (h1, h2) = (t1 - t0, t2 - t1);
            let second = 2.0 * ((f2 - f1) / h2 - (f1 - f0) / h1) / (h1 + h2);
            self.rows[i].specific_heat = Some(-t1 * second);
        }
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), MedError> {
    for (i, &t) in grid.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(MedError::BadTemperature(t));
        }
        if i > 0 && t <= grid[i - 1] {
            return Err(MedError::InvalidConfig(
                "temperature grid must be strictly ascending".into(),
            ));
        }
    }
    Ok(())
}

/// Solves at every grid temperature.
///
/// With `warm_start` the points run sequentially from the highest `T` down, each
/// starting at the previous optimum; otherwise they run independently in parallel.
pub fn temperature_sweep(
    problem: &MarkovProblem,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<SweepResult, MedError> {
    config.validate()?;
    check_grid(grid)?;
    let results: Vec<MedResult> = if config.warm_start {
        let mut out: Vec<MedResult> = Vec::with_capacity(grid.len());
        for &t in grid.iter().rev() {
            let warm = out.last().map(|r| r.generators.as_slice());
            out.push(minimize(problem, t, config, warm)?);
        }
        out.reverse();
        out
    } else {
        grid.par_iter()
            .map(|&t| minimize(problem, t, config, None))
            .collect::<Result<_, _>>()?
    };
    let mut sweep = SweepResult {
        rows: results
            .into_iter()
            .map(|result| SweepRow {
                result,
                specific_heat: None,
            })
            .collect(),
    };
    sweep.fill_specific_heat();
    Ok(sweep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSearch {
    /// Stop the golden-section search once the bracket is narrower than this.
    pub t_tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for BoundSearch {
    fn default() -> Self {
        Self {
            t_tolerance: 1e-3,
            max_evaluations: 30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundBound {
    /// `max_T F_MED(T)` over every evaluated temperature (per site).
    pub bound: f64,
    pub temperature: f64,
    /// Whether `S_M` changed sign on the grid.
    pub bracketed: bool,
    pub note: Option<String>,
    /// Every point the bound was taken over was converged.
    pub converged: bool,
    /// Extra solves made during refinement.
    pub refinements: Vec<MedResult>,
}

/// Lower bound on the ground energy per site: `F_MED(T) ≤ F(T) ≤ E₀`, maximized over
/// `T`. The maximum sits where `S_M` changes sign; it is refined by golden-section
/// search inside the first bracket on the grid where `S_M` goes from negative to positive.
pub fn ground_energy_lower_bound(
    problem: &MarkovProblem,
    sweep: &SweepResult,
    config: &SolverConfig,
    search: &BoundSearch,
) -> Result<GroundBound, MedError> {
    if sweep.rows.is_empty() {
        return Err(MedError::InvalidConfig("empty sweep".into()));
    }
    let rows: Vec<&MedResult> = sweep.rows.iter().map(|r| &r.result).collect();
    let (imax, best) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| {
            if r.free_energy > acc.1 {
                (i, r.free_energy)
            } else {
                acc
            }
        });
    let bracket = (0..rows.len() - 1)
        .find(|&i| rows[i].markov_entropy < 0.0 && rows[i + 1].markov_entropy > 0.0);
    let Some(i) = bracket else {
        return Ok(GroundBound {
            bound: best,
            temperature: rows[imax].temperature,
            bracketed: false,
            note: Some("crossing not bracketed".into()),
            converged: rows[imax].converged,
            refinements: Vec::new(),
        });
    };

    let (mut a, mut b) = (rows[i].temperature, rows[i + 1].temperature);
    let seed_for = |t: f64| {
        if (t - a).abs() < (t - b).abs() {
            rows[i].generators.clone()
        } else {
            rows[i + 1].generators.clone()
        }
    };
    let mut refinements: Vec<MedResult> = Vec::new();
    let mut solve = |t: f64, warm: Vec<_>| -> Result<MedResult, MedError> {
        let r = minimize(problem, t, config, Some(&warm))?;
        refinements.push(r.clone());
        Ok(r)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = solve(c, seed_for(c))?;
    let mut fd = solve(d, seed_for(d))?;
    let mut evals = 2;
    while (b - a) > search.t_tolerance && evals < search.max_evaluations {
        if fc.free_energy > fd.free_energy {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            let warm = fd.generators.clone();
            fc = solve(c, warm)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            let warm = fc.generators.clone();
            fd = solve(d, warm)?;
        }
        evals += 1;
    }

    let mut bound = best;
    let mut temperature = rows[imax].temperature;
    let mut converged = rows[imax].converged;
    for r in &refinements {
        if r.free_energy > bound {
            bound = r.free_energy;
            temperature = r.temperature;
            converged = r.converged;
        }
    }
    Ok(GroundBound {
        bound,
        temperature,
        bracketed: true,
        note: None,
        converged,
        refinements,
    })
}
