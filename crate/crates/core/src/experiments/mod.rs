//! Scenario drivers. Each runner takes an [`ExperimentConfig`], integrates
//! one or more trajectories and returns a [`RunResult`]: time-series
//! tables, fitted rates, reported values and named pass/fail checks.
//!
//! Independent trajectories of a sweep run on the rayon pool and are merged
//! in parameter order, so results do not depend on scheduling.

mod config;
mod convergence;
mod dissipativity;
mod lipschitz;
mod smoothing;
mod splitting;
mod strong_norm;

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{
    ConvergenceConfig, DissipativityConfig, EquationConfig, ExperimentConfig, ExperimentKind,
    ForcingConfig, ForcingKind, GridConfig, InitialConfig, LipschitzConfig, Preset, SmoothingConfig,
    SplittingConfig, StrongNormConfig, TimeConfig,
};
pub use convergence::run_convergence;
pub use dissipativity::run_dissipativity;
pub use lipschitz::run_lipschitz;
pub use smoothing::run_smoothing;
pub use splitting::run_splitting;
pub use strong_norm::run_strong_norm;

use crate::diagnostics::{energy_norm, energy_report, DecayFit};
use crate::error::Result;
use crate::integrator::{rhs_accel, EquationSpec, State};

/// Columns of the per-trajectory time series.
pub const TIMESERIES_COLUMNS: [&str; 9] = [
    "t",
    "E",
    "modified_E",
    "energy_norm",
    "h1_u",
    "h2_u",
    "h1_dtu",
    "hm1_dtdtu",
    "balance_residual",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(name: impl Into<String>, columns: &[S]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Whether a failed check is a statement about the equation or a sign of
/// an implementation inconsistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Physics,
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub invariant: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `measured <= threshold`.
    pub fn at_most(invariant: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            invariant: invariant.into(),
            kind: CheckKind::Physics,
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }

    /// Passes when `measured >= threshold`.
    pub fn at_least(invariant: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            invariant: invariant.into(),
            kind: CheckKind::Physics,
            passed: measured >= threshold,
            measured,
            threshold,
        }
    }

    /// Passes when `measured > threshold`.
    pub fn above(invariant: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            invariant: invariant.into(),
            kind: CheckKind::Physics,
            passed: measured > threshold,
            measured,
            threshold,
        }
    }

    pub fn consistency(mut self) -> Self {
        self.kind = CheckKind::Consistency;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub name: String,
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl FitRecord {
    pub fn new(name: impl Into<String>, fit: DecayFit) -> Self {
        FitRecord {
            name: name.into(),
            rate: fit.rate,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub scheme: String,
    pub dt: f64,
    pub modes: usize,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub experiment: ExperimentKind,
    pub tables: Vec<Table>,
    pub fits: Vec<FitRecord>,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
}

impl RunResult {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let hash = Sha256::digest(cfg.to_toml()?.as_bytes());
        Ok(RunResult {
            experiment: cfg.experiment,
            tables: Vec::new(),
            fits: Vec::new(),
            values: BTreeMap::new(),
            checks: Vec::new(),
            provenance: Provenance {
                config_hash: hex::encode(hash),
                seed: cfg.initial.seed,
                scheme: cfg.time.scheme.name().to_string(),
                dt: cfg.time.dt,
                modes: cfg.grid.n,
                grid_points: cfg.basis()?.grid_points(),
            },
        })
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.failed().next().is_none()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, invariant: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.invariant == invariant)
    }

    fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Dissipativity => run_dissipativity(cfg),
        ExperimentKind::Lipschitz => run_lipschitz(cfg),
        ExperimentKind::Smoothing => run_smoothing(cfg),
        ExperimentKind::Splitting => run_splitting(cfg),
        ExperimentKind::StrongNorm => run_strong_norm(cfg),
        ExperimentKind::Convergence => run_convergence(cfg),
    }
}

/// One row of [`TIMESERIES_COLUMNS`].
fn timeseries_row(state: &State, eq: &EquationSpec, alpha: f64, balance: f64) -> Result<Vec<f64>> {
    let basis = eq.basis();
    let e = energy_report(state, eq, alpha)?;
    let accel = rhs_accel(state, eq)?;
    Ok(vec![
        state.t,
        e.total,
        e.modified_total,
        energy_norm(state, eq)?,
        basis.sobolev_norm(&state.u, 1.0),
        basis.sobolev_norm(&state.u, 2.0),
        basis.sobolev_norm(&state.v, 1.0),
        basis.sobolev_norm(&accel, -1.0),
        balance,
    ])
}

fn scaled_state(state: &State, factor: f64) -> State {
    State {
        u: state.u.scaled(factor),
        v: state.v.scaled(factor),
        t: state.t,
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// `max over [T/2, T]` and `max over [0, T/2]` of a sampled series.
fn half_maxima(times: &[f64], values: &[f64]) -> (f64, f64) {
    let t_end = times.last().copied().unwrap_or(0.0);
    let mid = 0.5 * t_end;
    let late = max_of(times.iter().zip(values).filter(|(t, _)| **t >= mid).map(|(_, v)| *v));
    let early = max_of(times.iter().zip(values).filter(|(t, _)| **t <= mid).map(|(_, v)| *v));
    (late, early)
}
