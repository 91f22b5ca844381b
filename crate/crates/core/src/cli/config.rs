use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::CliError;
use crate::bpdual::{BPConfig, MessageRule};
use crate::lattice::{Boundary, LatticeKind, LatticeSpec, ModelKind, ModelSpec, ShieldTemplate, TermAssignment};
use crate::med::{BoundSearch, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sweep,
    Bound,
    Bp,
    Reconstruct,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Bound => "bound",
            Command::Bp => "bp",
            Command::Reconstruct => "reconstruct",
            Command::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sweep" => Some(Command::Sweep),
            "bound" => Some(Command::Bound),
            "bp" => Some(Command::Bp),
            "reconstruct" => Some(Command::Reconstruct),
            "verify" => Some(Command::Verify),
            _ => None,
        }
    }
}

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// May be left out of the file and supplied on the command line.
    pub command: Option<Command>,
    pub seed: u64,
    pub model: ModelSpec,
    pub lattice: LatticeSpec,
    /// Shield templates for translation-invariant lattices; several make a multi-patch problem.
    pub templates: Vec<ShieldTemplate>,
    /// Neighborhood radius for finite lattices.
    pub radius: usize,
    pub assignment: TermAssignment,
    pub temperatures: Vec<f64>,
    pub solver: SolverConfig,
    /// Message window `n` (clusters of `n + 1` sites).
    pub bp_window: usize,
    pub bp: BPConfig,
    pub search: BoundSearch,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            model: ModelSpec::heisenberg(1.0),
            lattice: LatticeSpec::ti_chain(),
            templates: Vec::new(),
            radius: 1,
            assignment: TermAssignment::HighestSite,
            temperatures: Vec::new(),
            solver: SolverConfig::default(),
            bp_window: 1,
            bp: BPConfig::default(),
            search: BoundSearch::default(),
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["command", "seed"]),
    ("model", &["kind", "coupling", "field"]),
    ("lattice", &["kind", "extent", "boundary"]),
    ("shield", &["templates", "radius", "assignment"]),
    ("temperatures", &["grid"]),
    (
        "solver",
        &[
            "tol_gradient",
            "tol_constraint",
            "max_outer",
            "max_inner",
            "penalty_init",
            "penalty_growth",
            "init_noise",
            "warm_start",
            "spin_flip_symmetry",
        ],
    ),
    ("bp", &["window", "damping", "tol", "max_iterations", "rule"]),
    ("bound", &["t_tolerance", "max_evaluations"]),
];

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| err(line, format!("`{key}` expects a number, got `{value}`")))
}

fn boolean(line: usize, key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("`{key}` expects true or false, got `{value}`"))),
    }
}

/// `chain(n)`, `square7`, `square10` or an explicit offset list.
fn template(line: usize, text: &str) -> Result<ShieldTemplate, CliError> {
    let text = text.trim();
    match text {
        "square7" => return Ok(ShieldTemplate::square7()),
        "square10" => return Ok(ShieldTemplate::square10()),
        _ => {}
    }
    if let Some(n) = text.strip_prefix("chain(").and_then(|s| s.strip_suffix(')')) {
        let n: usize = number(line, "templates", n.trim())?;
        if n == 0 {
            return Err(err(line, "chain(n) needs n ≥ 1"));
        }
        return Ok(ShieldTemplate::chain(n));
    }
    ShieldTemplate::parse(text).map_err(|e| err(line, e.to_string()))
}

/// Parses the sectioned `key = value` format; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    let mut section: Option<&str> = None;
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut kind_line = 0;
    let mut extent: Option<(usize, Vec<usize>)> = None;
    let mut boundary: Option<Boundary> = None;
    let mut grid_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            let Some((known, _)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                return Err(err(line, format!("unknown section [{name}]")));
            };
            section = Some(known);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(line, format!("expected `key = value`, got `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            return Err(err(line, format!("key `{key}` appears before any section")));
        };
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(err(line, format!("unknown key `{key}` in [{sec}]")));
        }
        if !seen.insert((sec.to_string(), key.to_string())) {
            return Err(err(line, format!("duplicate key `{key}` in [{sec}]")));
        }
        match (sec, key) {
            ("run", "command") => {
                config.command = Some(
                    Command::parse(value).ok_or_else(|| err(line, format!("unknown command `{value}`")))?,
                )
            }
            ("run", "seed") => config.seed = number(line, key, value)?,
            ("model", "kind") => {
                config.model.kind =
                    ModelKind::parse(value).ok_or_else(|| err(line, format!("unknown model `{value}`")))?
            }
            ("model", "coupling") => config.model.coupling = number(line, key, value)?,
            ("model", "field") => config.model.field = number(line, key, value)?,
            ("lattice", "kind") => {
                config.lattice.kind =
                    LatticeKind::parse(value).ok_or_else(|| err(line, format!("unknown lattice `{value}`")))?;
                kind_line = line;
            }
            ("lattice", "extent") => {
                let dims = value
                    .split('x')
                    .map(|d| number(line, key, d.trim()))
                    .collect::<Result<Vec<usize>, _>>()?;
                extent = Some((line, dims));
            }
            ("lattice", "boundary") => {
                boundary = Some(
                    Boundary::parse(value).ok_or_else(|| err(line, format!("unknown boundary `{value}`")))?,
                )
            }
            ("shield", "templates") => {
                config.templates = value
                    .split(';')
                    .map(|t| template(line, t))
                    .collect::<Result<_, _>>()?
            }
            ("shield", "radius") => config.radius = number(line, key, value)?,
            ("shield", "assignment") => {
                config.assignment = TermAssignment::parse(value)
                    .ok_or_else(|| err(line, format!("unknown assignment `{value}`")))?
            }
            ("temperatures", "grid") => {
                // an empty grid is allowed and yields a header-only table
                config.temperatures = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|t| number(line, key, t.trim()))
                        .collect::<Result<_, _>>()?
                };
                grid_line = line;
            }
            ("solver", "tol_gradient") => config.solver.tol_gradient = number(line, key, value)?,
            ("solver", "tol_constraint") => config.solver.tol_constraint = number(line, key, value)?,
            ("solver", "max_outer") => config.solver.max_outer = number(line, key, value)?,
            ("solver", "max_inner") => config.solver.max_inner = number(line, key, value)?,
            ("solver", "penalty_init") => config.solver.penalty_init = number(line, key, value)?,
            ("solver", "penalty_growth") => config.solver.penalty_growth = number(line, key, value)?,
            ("solver", "init_noise") => config.solver.init_noise = number(line, key, value)?,
            ("solver", "warm_start") => config.solver.warm_start = boolean(line, key, value)?,
            ("solver", "spin_flip_symmetry") => config.solver.spin_flip_symmetry = boolean(line, key, value)?,
            ("bp", "window") => config.bp_window = number(line, key, value)?,
            ("bp", "damping") => config.bp.damping = number(line, key, value)?,
            ("bp", "tol") => config.bp.tol = number(line, key, value)?,
            ("bp", "max_iterations") => config.bp.max_iterations = number(line, key, value)?,
            ("bp", "rule") => {
                config.bp.rule =
                    MessageRule::parse(value).ok_or_else(|| err(line, format!("unknown rule `{value}`")))?
            }
            ("bound", "t_tolerance") => config.search.t_tolerance = number(line, key, value)?,
            ("bound", "max_evaluations") => config.search.max_evaluations = number(line, key, value)?,
            _ => unreachable!("key table and match agree"),
        }
    }

    let kind = config.lattice.kind;
    config.lattice = match kind {
        LatticeKind::TiChain => LatticeSpec::ti_chain(),
        LatticeKind::TiSquare => LatticeSpec::ti_square(),
        LatticeKind::Chain | LatticeKind::Square => {
            let (line, dims) = extent.ok_or_else(|| err(kind_line, "finite lattices need `extent`"))?;
            let boundary = boundary.unwrap_or(Boundary::Open);
            match (kind, dims.as_slice()) {
                (LatticeKind::Chain, [n]) => LatticeSpec::chain(*n, boundary),
                (LatticeKind::Square, [lx, ly]) => LatticeSpec::square(*lx, *ly, boundary),
                _ => return Err(err(line, format!("extent {dims:?} does not fit a {}", kind.name()))),
            }
        }
    };
    if let Some(b) = boundary {
        if kind.is_translation_invariant() && b != Boundary::Periodic {
            return Err(err(kind_line, "translation-invariant lattices have no boundary"));
        }
    }
    config.lattice.validate().map_err(|e| err(kind_line, e.to_string()))?;
    config.solver.seed = config.seed;
    validate(&config, grid_line)?;
    Ok(config)
}

fn validate(config: &RunConfig, grid_line: usize) -> Result<(), CliError> {
    for (i, &t) in config.temperatures.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(err(grid_line, format!("temperature {t} is not positive")));
        }
        if i > 0 && t <= config.temperatures[i - 1] {
            return Err(err(grid_line, "temperature grid must be strictly ascending"));
        }
    }
    if !config.model.is_finite() {
        return Err(err(0, "model parameters must be finite"));
    }
    config.solver.validate().map_err(|e| err(0, e.to_string()))?;
    config.bp.validate().map_err(|e| err(0, e.to_string()))?;
    if config.bp_window == 0 {
        return Err(err(0, "bp window must be at least 1"));
    }
    if config.radius == 0 {
        return Err(err(0, "shield radius must be at least 1"));
    }
    Ok(())
}

fn float(x: f64) -> String {
    // `{:?}` prints the shortest string that reads back to the same value
    format!("{x:?}")
}

/// Writes `config` in the format [`parse_config`] reads, every field spelled out.
pub fn render_config(config: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    if let Some(c) = config.command {
        let _ = writeln!(s, "command = {}", c.name());
    }
    let _ = writeln!(s, "seed = {}", config.seed);
    let _ = writeln!(s, "\n[model]");
    let _ = writeln!(s, "kind = {}", config.model.kind.name());
    let _ = writeln!(s, "coupling = {}", float(config.model.coupling));
    let _ = writeln!(s, "field = {}", float(config.model.field));
    let _ = writeln!(s, "\n[lattice]");
    let _ = writeln!(s, "kind = {}", config.lattice.kind.name());
    if !config.lattice.kind.is_translation_invariant() {
        let dims: Vec<String> = config.lattice.extent.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "extent = {}", dims.join("x"));
        let _ = writeln!(s, "boundary = {}", config.lattice.boundary.name());
    }
    let _ = writeln!(s, "\n[shield]");
    if !config.templates.is_empty() {
        let t: Vec<String> = config.templates.iter().map(|t| t.render()).collect();
        let _ = writeln!(s, "templates = {}", t.join("; "));
    }
    let _ = writeln!(s, "radius = {}", config.radius);
    let _ = writeln!(s, "assignment = {}", config.assignment.name());
    if !config.temperatures.is_empty() {
        let _ = writeln!(s, "\n[temperatures]");
        let t: Vec<String> = config.temperatures.iter().map(|&t| float(t)).collect();
        let _ = writeln!(s, "grid = {}", t.join(", "));
    }
    let v = &config.solver;
    let _ = writeln!(s, "\n[solver]");
    let _ = writeln!(s, "tol_gradient = {}", float(v.tol_gradient));
    let _ = writeln!(s, "tol_constraint = {}", float(v.tol_constraint));
    let _ = writeln!(s, "max_outer = {}", v.max_outer);
    let _ = writeln!(s, "max_inner = {}", v.max_inner);
    let _ = writeln!(s, "penalty_init = {}", float(v.penalty_init));
    let _ = writeln!(s, "penalty_growth = {}", float(v.penalty_growth));
    let _ = writeln!(s, "init_noise = {}", float(v.init_noise));
    let _ = writeln!(s, "warm_start = {}", v.warm_start);
    let _ = writeln!(s, "spin_flip_symmetry = {}", v.spin_flip_symmetry);
    let _ = writeln!(s, "\n[bp]");
    let _ = writeln!(s, "window = {}", config.bp_window);
    let _ = writeln!(s, "damping = {}", float(config.bp.damping));
    let _ = writeln!(s, "tol = {}", float(config.bp.tol));
    let _ = writeln!(s, "max_iterations = {}", config.bp.max_iterations);
    let _ = writeln!(s, "rule = {}", config.bp.rule.name());
    let _ = writeln!(s, "\n[bound]");
    let _ = writeln!(s, "t_tolerance = {}", float(config.search.t_tolerance));
    let _ = writeln!(s, "max_evaluations = {}", config.search.max_evaluations);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[run]
command = sweep
[model]
kind = classical_ising
[lattice]
kind = ti_chain
[shield]
templates = chain(1)
[temperatures]
grid = 0.5, 1, 2
";

    #[test]
    fn minimal_sweep() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Some(Command::Sweep));
        assert_eq!(c.model.kind, ModelKind::ClassicalIsing);
        assert_eq!(c.templates, vec![ShieldTemplate::chain(1)]);
        assert_eq!(c.temperatures, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn duplicate_key_names_key_and_line() {
        let text = format!("{MINIMAL}[model]\ncoupling = 1\ncoupling = 2\n");
        match parse_config(&text) {
            Err(CliError::Config { line, message }) => {
                assert_eq!(line, 13);
                assert!(message.contains("coupling"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_lines() {
        let cases = [
            ("[run]\nbogus = 1\n", 2),
            ("[nowhere]\n", 1),
            ("[shield]\ntemplates = [(1,0)]\n", 2),
            ("[temperatures]\ngrid = 1, 0.5\n", 2),
            ("seed = 1\n", 1),
        ];
        for (text, expected) in cases {
            match parse_config(text) {
                Err(CliError::Config { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("unexpected {other:?} for {text}"),
            }
        }
    }

    #[test]
    fn finite_lattice_needs_extent() {
        assert!(parse_config("[lattice]\nkind = chain\n").is_err());
        let c = parse_config("[lattice]\nkind = square\nextent = 3x4\nboundary = periodic\n").unwrap();
        assert_eq!(c.lattice.extent, vec![3, 4]);
    }

    #[test]
    fn render_round_trips() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.templates.push(ShieldTemplate::square7());
        c.temperatures = vec![0.1, 1.0 / 3.0, 7.25];
        c.solver.init_noise = 1e-3;
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
    }
}
