//! Batch front end: a sectioned config file in, CSV tables and a JSON manifest out.
//!
//! ```text
//! [run]
//! command = sweep        # sweep | bound | bp | reconstruct | verify
//! seed = 0
//! [model]
//! kind = heisenberg      # heisenberg | classical_ising | tfim
//! coupling = 1
//! field = 0
//! [lattice]
//! kind = ti_chain        # ti_chain | ti_square | chain | square
//! extent = 8             # finite lattices only; 4x4 for squares
//! boundary = periodic
//! [shield]
//! templates = chain(3)   # translation-invariant; `;`-separated for several patches
//! radius = 2             # finite lattices
//! [temperatures]
//! grid = 0.1, 0.2, 0.5, 1
//! ```
//!
//! Optional `[solver]`, `[bp]` and `[bound]` sections override the defaults; the
//! manifest echoes every setting actually used.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{parse_config, render_config, Command, RunConfig};

use crate::bpdual::{self, BpError, ChainProblem};
use crate::lattice::{
    build_lattice, markov_shields, LatticeError, LatticeKind, LatticeModel, Neighborhood,
};
use crate::markovnet::{self, MarkovError, ReconstructionMethod};
use crate::med::{
    ground_energy_lower_bound, temperature_sweep, MarkovProblem, MedError, MedResult, SweepResult,
};
use crate::oracle::{self, OracleError};

/// Header of every per-temperature results table.
pub const CSV_HEADER: &str = "T,F_per_site,E_per_site,S_M_per_site,residual,iterations,converged";
pub const RECONSTRUCT_HEADER: &str = "T,max_cmi,petz_trace_distance,log_trace_distance";
pub const ORACLE_HEADER: &str = "T,F_exact_per_site,E_exact_per_site,S_exact_per_site,bound_holds";
/// A verify row is flagged when `F_MED` exceeds the exact value by more than this.
pub const VERIFY_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("no command given in the config or on the command line")]
    MissingCommand,
    #[error("{0}")]
    Unsupported(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("solver: {0}")]
    Med(#[from] MedError),
    #[error("belief propagation: {0}")]
    Bp(#[from] BpError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("reconstruction: {0}")]
    Markov(#[from] MarkovError),
    #[error("lattice: {0}")]
    Lattice(#[from] LatticeError),
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub temperature: f64,
    pub free_energy: f64,
    pub energy: f64,
    pub markov_entropy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&MedResult> for ResultRow {
    fn from(r: &MedResult) -> Self {
        Self {
            temperature: r.temperature,
            free_energy: r.free_energy,
            energy: r.energy,
            markov_entropy: r.markov_entropy,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

/// Everything a run produces, before it is written anywhere.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub command: Command,
    pub rows: Vec<ResultRow>,
    /// Extra tables as `(file name, contents)`.
    pub extra_files: Vec<(String, String)>,
    pub manifest: Value,
    pub flagged: bool,
    pub notes: Vec<String>,
}

impl RunOutput {
    /// 0 when every row converged, 2 when any was flagged.
    pub fn exit_code(&self) -> i32 {
        if self.flagged {
            2
        } else {
            0
        }
    }
}

/// 17 significant digits, `.` decimal point.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_float(r.temperature),
            format_float(r.free_energy),
            format_float(r.energy),
            format_float(r.markov_entropy),
            format_float(r.residual),
            r.iterations,
            r.converged
        ));
    }
    s
}

fn build_problem(config: &RunConfig) -> Result<MarkovProblem, CliError> {
    if config.lattice.kind.is_translation_invariant() {
        if config.templates.is_empty() {
            return Err(CliError::Config {
                line: 0,
                message: "translation-invariant lattices need [shield] templates".into(),
            });
        }
        Ok(MarkovProblem::translation_invariant_patches(
            config.lattice.kind,
            &config.model,
            &config.templates,
        )?)
    } else {
        let lm = build_lattice(&config.lattice, &config.model)?;
        Ok(MarkovProblem::finite(
            &lm,
            &[Neighborhood::Radius(config.radius)],
            config.assignment,
        )?)
    }
}

fn require_grid(config: &RunConfig) -> Result<(), CliError> {
    if config.temperatures.is_empty() {
        return Err(CliError::Config {
            line: 0,
            message: "[temperatures] grid is empty".into(),
        });
    }
    Ok(())
}

fn base_manifest(config: &RunConfig, command: Command, shields: &[String]) -> Value {
    json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "config": render_config(config),
        "seed": config.seed,
        "model": config.model,
        "lattice": {
            "kind": config.lattice.kind.name(),
            "extent": config.lattice.extent,
            "boundary": config.lattice.boundary.name(),
        },
        "shields": shields,
        "assignment": config.assignment.name(),
        "solver": config.solver,
        "bp": { "window": config.bp_window, "config": config.bp },
        "bound_search": config.search,
    })
}

fn sweep_rows(sweep: &SweepResult) -> Vec<ResultRow> {
    sweep.rows.iter().map(|r| ResultRow::from(&r.result)).collect()
}

/// Runs `config` (with `command` overriding the config's own, if given).
pub fn run_command(config: &RunConfig, command: Option<Command>) -> Result<RunOutput, CliError> {
    let command = command.or(config.command).ok_or(CliError::MissingCommand)?;
    let started = Instant::now();
    let mut out = match command {
        Command::Sweep => run_sweep(config)?,
        Command::Bound => run_bound(config)?,
        Command::Bp => run_bp(config)?,
        Command::Reconstruct => run_reconstruct(config)?,
        Command::Verify => run_verify(config)?,
    };
    let flags: Vec<bool> = out.rows.iter().map(|r| r.converged).collect();
    if let Value::Object(m) = &mut out.manifest {
        m.insert("wall_clock_seconds".into(), json!(started.elapsed().as_secs_f64()));
        m.insert("row_converged".into(), json!(flags));
        m.insert("flagged".into(), json!(out.flagged));
        m.insert("notes".into(), json!(out.notes));
    }
    Ok(out)
}

fn run_sweep(config: &RunConfig) -> Result<RunOutput, CliError> {
    let problem = build_problem(config)?;
    let sweep = temperature_sweep(&problem, &config.temperatures, &config.solver)?;
    let rows = sweep_rows(&sweep);
    let flagged = !sweep.all_converged();
    Ok(RunOutput {
        command: Command::Sweep,
        manifest: base_manifest(config, Command::Sweep, problem.shield_description()),
        rows,
        extra_files: Vec::new(),
        flagged,
        notes: Vec::new(),
    })
}

fn run_bound(config: &RunConfig) -> Result<RunOutput, CliError> {
    require_grid(config)?;
    let problem = build_problem(config)?;
    let sweep = temperature_sweep(&problem, &config.temperatures, &config.solver)?;
    let bound = ground_energy_lower_bound(&problem, &sweep, &config.solver, &config.search)?;
    let mut rows = sweep_rows(&sweep);
    rows.extend(bound.refinements.iter().map(ResultRow::from));
    rows.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));
    let mut notes = Vec::new();
    if let Some(n) = &bound.note {
        notes.push(n.clone());
    }
    let flagged = !bound.bracketed || !bound.converged || rows.iter().any(|r| !r.converged);
    let mut manifest = base_manifest(config, Command::Bound, problem.shield_description());
    manifest["bound"] = json!({
        "ground_energy_lower_bound": bound.bound,
        "temperature": bound.temperature,
        "bracketed": bound.bracketed,
        "converged": bound.converged,
        "refinements": bound.refinements.len(),
    });
    Ok(RunOutput {
        command: Command::Bound,
        rows,
        extra_files: Vec::new(),
        manifest,
        flagged,
        notes,
    })
}

fn run_bp(config: &RunConfig) -> Result<RunOutput, CliError> {
    let problem = match config.lattice.kind {
        LatticeKind::TiChain => ChainProblem::translation_invariant(&config.model, config.bp_window)?,
        LatticeKind::Chain => {
            let lm = build_lattice(&config.lattice, &config.model)?;
            ChainProblem::open_chain(&lm, config.bp_window)?
        }
        other => {
            return Err(CliError::Unsupported(format!(
                "belief propagation runs on chains, not {}",
                other.name()
            )))
        }
    };
    let mut rows = Vec::new();
    for &t in &config.temperatures {
        let (state, f) = bpdual::solve(&problem, t, &config.bp)?;
        rows.push(ResultRow {
            temperature: t,
            free_energy: f.free_energy,
            energy: f.energy,
            markov_entropy: f.markov_entropy,
            residual: state.residual,
            iterations: state.iterations,
            converged: state.converged,
        });
    }
    let flagged = rows.iter().any(|r| !r.converged);
    let n = config.bp_window;
    let shields = vec![format!("messages on {n} sites, clusters of {}", n + 1)];
    Ok(RunOutput {
        command: Command::Bp,
        manifest: base_manifest(config, Command::Bp, &shields),
        rows,
        extra_files: Vec::new(),
        flagged,
        notes: Vec::new(),
    })
}

fn finite_hamiltonian(config: &RunConfig) -> Result<LatticeModel, CliError> {
    if config.lattice.kind.is_translation_invariant() {
        return Err(CliError::Unsupported(
            "reconstruct and verify need a finite lattice".into(),
        ));
    }
    Ok(build_lattice(&config.lattice, &config.model)?)
}

fn run_reconstruct(config: &RunConfig) -> Result<RunOutput, CliError> {
    let lm = finite_hamiltonian(config)?;
    let h = lm.hamiltonian()?;
    let shields = markov_shields(&lm.lattice, &lm.ordering, &Neighborhood::Radius(config.radius))?;
    let ordering: Vec<usize> = shields.iter().map(|s| s.site).collect();
    let shield_sets: Vec<Vec<usize>> = shields.iter().map(|s| s.shield.clone()).collect();
    let mut table = String::from(RECONSTRUCT_HEADER);
    table.push('\n');
    for &t in &config.temperatures {
        let gibbs = oracle::gibbs_state(&h, t)?;
        let marginals = markovnet::chain_marginals(&gibbs, &ordering, &shield_sets)?;
        let petz = markovnet::chain_reconstruct(
            &marginals,
            &ordering,
            &shield_sets,
            ReconstructionMethod::Petz,
            Some(&gibbs),
        )?;
        let log = markovnet::chain_reconstruct(
            &marginals,
            &ordering,
            &shield_sets,
            ReconstructionMethod::AdditiveLog,
            Some(&gibbs),
        )?;
        let max_cmi = petz
            .reference_cmi
            .as_ref()
            .map(|c| c.iter().copied().fold(0.0, f64::max))
            .unwrap_or(0.0);
        table.push_str(&format!(
            "{},{},{},{}\n",
            format_float(t),
            format_float(max_cmi),
            format_float(petz.trace_distance.unwrap_or(f64::NAN)),
            format_float(log.trace_distance.unwrap_or(f64::NAN)),
        ));
    }
    let described: Vec<String> = shields.iter().map(|s| format!("{}:{:?}", s.site, s.shield)).collect();
    Ok(RunOutput {
        command: Command::Reconstruct,
        manifest: base_manifest(config, Command::Reconstruct, &[described.join(" ")]),
        rows: Vec::new(),
        extra_files: vec![("reconstruct.csv".into(), table)],
        flagged: false,
        notes: Vec::new(),
    })
}

fn run_verify(config: &RunConfig) -> Result<RunOutput, CliError> {
    let lm = finite_hamiltonian(config)?;
    let h = lm.hamiltonian()?;
    let n = lm.lattice.n_sites();
    let problem = build_problem(config)?;
    let sweep = temperature_sweep(&problem, &config.temperatures, &config.solver)?;
    let rows = sweep_rows(&sweep);
    let mut table = String::from(ORACLE_HEADER);
    table.push('\n');
    let mut flagged = false;
    let mut notes = Vec::new();
    for row in &rows {
        let exact = oracle::exact_free_energy(&h, row.temperature, n, false)?;
        let holds = row.free_energy <= exact.free_energy_per_site + VERIFY_SLACK;
        if !holds {
            notes.push(format!(
                "F_MED exceeds the exact free energy at T = {}",
                row.temperature
            ));
        }
        flagged |= !holds || !row.converged;
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(row.temperature),
            format_float(exact.free_energy_per_site),
            format_float(exact.energy_per_site()),
            format_float(exact.entropy_per_site()),
            holds
        ));
    }
    Ok(RunOutput {
        command: Command::Verify,
        manifest: base_manifest(config, Command::Verify, problem.shield_description()),
        rows,
        extra_files: vec![("oracle.csv".into(), table)],
        flagged,
        notes,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `<command>.csv` (for commands with per-temperature rows), any extra tables and
/// `manifest.json` into `dir`. Returns the paths written.
pub fn emit_results(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut written = Vec::new();
    if output.command != Command::Reconstruct {
        let path = dir.join(format!("{}.csv", output.command.name()));
        write(&path, &render_csv(&output.rows))?;
        written.push(path);
    }
    for (name, contents) in &output.extra_files {
        let path = dir.join(name);
        write(&path, contents)?;
        written.push(path);
    }
    let files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let mut manifest = output.manifest.clone();
    manifest["files"] = json!(files);
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is valid JSON") + "\n";
    write(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// Parses the file at `path`.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}
