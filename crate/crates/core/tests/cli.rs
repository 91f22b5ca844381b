use std::fs;
use std::path::Path;
use std::process::Command as Process;

use qmed::cli::*;
use qmed::oracle::ising_transfer_free_energy;

const ISING_SWEEP: &str = "
[run]
command = sweep
[model]
kind = classical_ising
coupling = 1
field = 0.3
[lattice]
kind = ti_chain
[shield]
templates = chain(2)
[temperatures]
grid = 0.5, 1, 2
";

const DIMER_VERIFY: &str = "
[run]
command = verify
[model]
kind = heisenberg
coupling = 1
[lattice]
kind = chain
extent = 2
boundary = open
[shield]
radius = 1
[temperatures]
grid = 0.3, 1
";

const HEISENBERG_BOUND: &str = "
[run]
command = bound
[model]
kind = heisenberg
[lattice]
kind = ti_chain
[shield]
templates = chain(2)
[temperatures]
grid = 0.5, 1
";

fn parse_row(line: &str) -> Vec<String> {
    line.split(',').map(str::to_owned).collect()
}

#[test]
fn sweep_matches_transfer_matrix() {
    let config = parse_config(ISING_SWEEP).unwrap();
    let out = run_command(&config, None).unwrap();
    assert_eq!(out.exit_code(), 0);
    assert_eq!(out.rows.len(), 3);
    for row in &out.rows {
        let exact = ising_transfer_free_energy(1.0, 0.3, row.temperature);
        assert!((row.free_energy - exact).abs() < 1e-6, "T = {}", row.temperature);
        let f = row.energy - row.temperature * row.markov_entropy;
        assert!((f - row.free_energy).abs() < 1e-9);
    }
}

#[test]
fn csv_layout() {
    let config = parse_config(ISING_SWEEP).unwrap();
    let out = run_command(&config, None).unwrap();
    let csv = render_csv(&out.rows);
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    for (line, row) in lines.zip(&out.rows) {
        let fields = parse_row(line);
        assert_eq!(fields.len(), 7);
        // 17 significant digits round-trip the value exactly
        assert_eq!(fields[1].parse::<f64>().unwrap(), row.free_energy);
        let mantissa = fields[1].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        assert_eq!(fields[6], "true");
    }
}

#[test]
fn verify_dimer_is_exact() {
    let config = parse_config(DIMER_VERIFY).unwrap();
    let out = run_command(&config, None).unwrap();
    assert_eq!(out.exit_code(), 0);
    let (_, oracle) = &out.extra_files[0];
    let mut lines = oracle.lines();
    assert_eq!(lines.next(), Some(ORACLE_HEADER));
    for (line, row) in lines.zip(&out.rows) {
        let fields = parse_row(line);
        let exact: f64 = fields[1].parse().unwrap();
        assert!((row.free_energy - exact).abs() < 1e-8);
        assert_eq!(fields[4], "true");
    }
}

#[test]
fn unbracketed_bound_is_flagged() {
    let config = parse_config(HEISENBERG_BOUND).unwrap();
    let out = run_command(&config, None).unwrap();
    assert!(out.flagged);
    assert_eq!(out.exit_code(), 2);
    assert!(!out.notes.is_empty());
    assert_eq!(out.manifest["bound"]["bracketed"], false);
}

#[test]
fn empty_grid_gives_header_only() {
    let text = ISING_SWEEP.replace("grid = 0.5, 1, 2", "grid =");
    let config = parse_config(&text).unwrap();
    let out = run_command(&config, None).unwrap();
    assert!(out.rows.is_empty());
    assert_eq!(render_csv(&out.rows), format!("{CSV_HEADER}\n"));
    assert_eq!(out.exit_code(), 0);
}

#[test]
fn command_line_overrides_config() {
    let config = parse_config(DIMER_VERIFY).unwrap();
    let out = run_command(&config, Some(Command::Reconstruct)).unwrap();
    assert_eq!(out.command, Command::Reconstruct);
    assert!(out.rows.is_empty());
    assert!(out.extra_files[0].1.starts_with(RECONSTRUCT_HEADER));

    let no_command = DIMER_VERIFY.replace("command = verify", "");
    let config = parse_config(&no_command).unwrap();
    assert!(matches!(run_command(&config, None), Err(CliError::MissingCommand)));
    let ti = parse_config(ISING_SWEEP).unwrap();
    assert!(matches!(
        run_command(&ti, Some(Command::Verify)),
        Err(CliError::Unsupported(_))
    ));
}

#[test]
fn emitted_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(DIMER_VERIFY).unwrap();
    let out = run_command(&config, None).unwrap();
    let written = emit_results(&out, dir.path()).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["verify.csv", "oracle.csv", "manifest.json"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "verify");
    assert_eq!(manifest["flagged"], false);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let echoed = parse_config(manifest["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed, config);
}

fn run_binary(config: &str, dir: &Path, extra: &[&str]) -> i32 {
    let path = dir.join("run.cfg");
    fs::write(&path, config).unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_qmed"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
        .status;
    status.code().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_binary(DIMER_VERIFY, dir.path(), &["--threads", "2"]), 0);
    assert!(dir.path().join("out/verify.csv").exists());
    assert_eq!(run_binary(HEISENBERG_BOUND, dir.path(), &[]), 2);
    assert_eq!(run_binary("[model]\nkind = potts\n", dir.path(), &[]), 1);
    assert_eq!(run_binary(DIMER_VERIFY, dir.path(), &["--command", "bp", "--seed", "3"]), 0);
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_binary(ISING_SWEEP, a.path(), &["--threads", "1", "--seed", "9"]), 0);
    assert_eq!(run_binary(ISING_SWEEP, b.path(), &["--threads", "3", "--seed", "9"]), 0);
    let read = |d: &Path| fs::read_to_string(d.join("out/sweep.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}
