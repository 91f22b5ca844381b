use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qmed::cli::{emit_results, load_config, run_command, Command};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Sweep,
    Bound,
    Bp,
    Reconstruct,
    Verify,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Sweep => Command::Sweep,
            CommandArg::Bound => Command::Bound,
            CommandArg::Bp => Command::Bp,
            CommandArg::Reconstruct => Command::Reconstruct,
            CommandArg::Verify => Command::Verify,
        }
    }
}

/// Markov-entropy free-energy bounds, belief propagation and state reconstruction.
///
/// Exit status: 0 when every row converged, 2 when any row was flagged, 1 on error.
#[derive(Debug, Parser)]
#[command(name = "qmed", version)]
struct Args {
    /// Sectioned key = value run description.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[run] command`.
    #[arg(long, value_enum)]
    command: Option<CommandArg>,
    /// Directory for the CSV tables and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent temperatures (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.solver.seed = seed;
    }
    let output = match run_command(&config, args.command.map(Command::from)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match emit_results(&output, &args.out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    for note in &output.notes {
        eprintln!("note: {note}");
    }
    ExitCode::from(output.exit_code() as u8)
}
