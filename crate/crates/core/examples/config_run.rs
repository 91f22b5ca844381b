//! Driving a run from the config format the `qmed` binary reads, writing the CSV and
//! manifest into a scratch directory.
//!
//! ```bash
//! cargo run --release --example config_run
//! ```

use qmed::cli::{emit_results, parse_config, run_command};

const CONFIG: &str = "
[run]
command = verify
seed = 7
[model]
kind = heisenberg
coupling = 1
[lattice]
kind = chain
extent = 6
boundary = periodic
[shield]
radius = 2
[temperatures]
grid = 0.5, 1, 2
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(CONFIG)?;
    let output = run_command(&config, None)?;
    let dir = std::env::temp_dir().join("qmed-config-run");
    for path in emit_results(&output, &dir)? {
        println!("== {}", path.display());
        if path.extension().is_some_and(|e| e == "csv") {
            print!("{}", std::fs::read_to_string(&path)?);
        }
    }
    println!("exit code would be {}", output.exit_code());
    Ok(())
}
