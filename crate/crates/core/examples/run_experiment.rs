//! Runs an experiment config in-process and prints its checks and fits.
//!
//! ```text
//! cargo run --example run_experiment -- configs/lipschitz.toml
//! ```

use std::env;
use std::fs;

use qsdw::experiments::{run, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = env::args().nth(1).unwrap_or_else(|| "configs/linear_dissipativity.toml".into());
    let cfg = ExperimentConfig::from_toml(&fs::read_to_string(&path)?)?;
    let result = run(&cfg)?;

    println!("{} ({})", result.experiment.name(), result.provenance.config_hash);
    for table in &result.tables {
        println!("table {}: {} rows, columns {:?}", table.name, table.rows.len(), table.columns);
    }
    for fit in &result.fits {
        println!("fit {}: rate {:.4} r² {:.4}", fit.name, fit.rate, fit.r_squared);
    }
    for (name, value) in &result.values {
        println!("{name} = {value:.6e}");
    }
    for c in &result.checks {
        println!("{} {} (measured {:.3e}, threshold {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.invariant, c.measured, c.threshold);
    }
    Ok(())
}
