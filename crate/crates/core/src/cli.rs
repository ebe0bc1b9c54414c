//! Config-driven runner behind the `qsdw run` command: loads a TOML
//! config, runs the experiment and writes CSV tables, a JSON summary and
//! the resolved config.
//!
//! Exit codes: 0 when every check passes, 1 for configuration or IO
//! errors, 2 when a physics check fails, 3 for numerical failures and
//! failed consistency checks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{self, Check, CheckKind, ExperimentConfig, FitRecord, RunResult, Table};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_PHYSICS: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Environment variable capping the size of the worker pool.
pub const THREADS_ENV: &str = "QSDW_THREADS";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    config_hash: &'a str,
    seed: Option<u64>,
    scheme: &'a str,
    dt: f64,
    modes: usize,
    grid_points: usize,
    wall_clock_seconds: f64,
    fits: &'a [FitRecord],
    values: &'a std::collections::BTreeMap<String, f64>,
    checks: &'a [Check],
    failed: Vec<&'a str>,
    exit_code: u8,
}

/// Sizes the global rayon pool from `QSDW_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} = {raw:?} must be a positive integer")))?;
    // a pool that is already initialised keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Reads and validates a config, applying a seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if seed.is_some() {
        cfg.initial.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exit code for a completed run.
pub fn classify(result: &RunResult) -> u8 {
    if result.failed().any(|c| c.kind == CheckKind::Consistency) {
        EXIT_NUMERICAL
    } else if result.failed().next().is_some() {
        EXIT_PHYSICS
    } else {
        EXIT_OK
    }
}

/// Exit code for an error.
pub fn error_code(err: &Error) -> u8 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Runs one config end to end and returns the process exit code.
pub fn run(opts: &RunOptions) -> u8 {
    let start = Instant::now();
    let cfg = match load_config(&opts.config, opts.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qsdw: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qsdw: {} failed: {e}", cfg.experiment.name());
            return error_code(&e);
        }
    };
    let code = classify(&result);
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = write_outputs(&cfg, &result, wall, code, &opts.output_dir) {
        eprintln!("qsdw: {e}");
        return EXIT_CONFIG;
    }
    if !opts.quiet {
        for c in &result.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            println!(
                "{status} {} (measured {:.6e}, threshold {:.6e})",
                c.invariant, c.measured, c.threshold
            );
        }
        println!("wrote {}", opts.output_dir.display());
    }
    for c in result.failed() {
        eprintln!("qsdw: invariant failed: {}", c.invariant);
    }
    code
}

/// Writes `timeseries.csv` (plus one CSV per further table),
/// `summary.json` and `config.resolved.toml`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &RunResult, wall: f64, code: u8, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for table in &result.tables {
        write_csv(table, &dir.join(format!("{}.csv", table.name)))?;
    }
    fs::write(dir.join("config.resolved.toml"), cfg.to_toml()?)?;
    write_summary(result, wall, code, &dir.join("summary.json"))
}

/// Header line plus one row per record, `{:.16e}` per value, `\n` endings.
pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_summary(result: &RunResult, wall: f64, code: u8, path: &Path) -> Result<()> {
    let p = &result.provenance;
    let summary = Summary {
        experiment: result.experiment.name(),
        config_hash: &p.config_hash,
        seed: p.seed,
        scheme: &p.scheme,
        dt: p.dt,
        modes: p.modes,
        grid_points: p.grid_points,
        wall_clock_seconds: wall,
        fits: &result.fits,
        values: &result.values,
        checks: &result.checks,
        failed: result.failed().map(|c| c.invariant.as_str()).collect(),
        exit_code: code,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&Table::new("t", &["a", "b"]), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new("t", &["x"]);
        t.rows.push(vec![0.1]);
        write_csv(&t, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x\n1.0000000000000001e-1\n");
        let back: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
