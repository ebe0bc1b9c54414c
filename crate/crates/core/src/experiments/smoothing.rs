use rayon::prelude::*;

use super::{max_of, timeseries_row, Check, ExperimentConfig, Preset, RunResult, Table, TIMESERIES_COLUMNS};
use crate::diagnostics::{balance_residual, default_alpha, least_squares};
use crate::error::Result;
use crate::integrator::{integrate_with, linear_exact_state, State, Trajectory};

struct Resolution {
    trajectory: Trajectory,
    initial_h1: f64,
    /// `||∂t u||_{H¹}` at each probe time
    probes: Vec<f64>,
    oracle: Option<Vec<f64>>,
}

/// Tracks `||∂t u(t)||_{H¹}` at fixed probe times, on `N` modes and, with
/// `refine`, on `2N` modes with nested initial data.
pub fn run_smoothing(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.smoothing.clone().unwrap_or_default();
    let mut cfg = cfg.clone();
    if cfg.initial.normalization_modes.is_none() {
        cfg.initial.normalization_modes = Some(cfg.basis()?.len());
    }
    let mut modes = vec![cfg.grid.n];
    if knobs.refine {
        modes.push(2 * cfg.grid.n);
    }
    let runs = modes
        .par_iter()
        .map(|&n| resolve(&cfg, n, &knobs.probe_times))
        .collect::<Vec<Result<Resolution>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let base = &runs[0];
    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let alpha = default_alpha(&eq);
    let balance = balance_residual(&base.trajectory, &eq)?;
    let mut series = Table::new("timeseries", &TIMESERIES_COLUMNS);
    for (j, sample) in base.trajectory.samples.iter().enumerate() {
        let r = if j == 0 { 0.0 } else { balance.residuals[j - 1] };
        series.rows.push(timeseries_row(&sample.state, &eq, alpha, r)?);
    }

    let mut columns = vec!["t".to_string()];
    for n in &modes {
        columns.push(format!("h1_dtu_N{n}"));
    }
    let fine = runs.last().expect("at least one resolution");
    if fine.oracle.is_some() {
        columns.push("oracle".to_string());
    }
    let mut probes = Table::new("probes", &columns);
    let mut row0 = vec![0.0];
    row0.extend(runs.iter().map(|r| r.initial_h1));
    if fine.oracle.is_some() {
        row0.push(fine.initial_h1);
    }
    probes.rows.push(row0);
    for (i, &t) in knobs.probe_times.iter().enumerate() {
        let mut row = vec![t];
        row.extend(runs.iter().map(|r| r.probes[i]));
        if let Some(o) = &fine.oracle {
            row.push(o[i]);
        }
        probes.rows.push(row);
    }

    let nonfinite = runs.iter().flat_map(|r| &r.probes).filter(|v| !v.is_finite()).count();
    result.checks.push(Check::at_most("probe values finite", nonfinite as f64, 0.0));

    if runs.len() == 2 {
        let change = max_of(
            runs[0]
                .probes
                .iter()
                .zip(&runs[1].probes)
                .map(|(a, b)| (b - a).abs() / b.abs().max(f64::MIN_POSITIVE)),
        );
        result.value("max_probe_change", change);
        result.checks.push(Check::at_most("probe values stable under refinement", change, knobs.stability_tolerance));
        let growth = runs[1].initial_h1 / runs[0].initial_h1 - 1.0;
        result.value("initial_h1_growth", growth);
        if cfg.initial.preset == Preset::RoughVelocity {
            result.checks.push(Check::at_least(
                "initial velocity roughness grows under refinement",
                growth,
                knobs.initial_growth,
            ));
        }
    }

    let (lt, ly): (Vec<f64>, Vec<f64>) = knobs
        .probe_times
        .iter()
        .zip(&fine.probes)
        .filter(|(t, v)| **t <= knobs.blowup_window && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    if lt.len() >= 2 {
        let line = least_squares(&lt, &ly);
        result.value("blowup_exponent", -line.slope);
        result.value("blowup_exponent_r_squared", line.r_squared);
    }

    if let Some(oracle) = &fine.oracle {
        let err = max_of(
            fine.probes
                .iter()
                .zip(oracle)
                .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)),
        );
        result.value("oracle_max_relative_error", err);
        result.checks.push(Check::at_most("linear probes match modal closed form", err, knobs.oracle_tolerance));
    }

    result.tables = vec![series, probes];
    Ok(result)
}

fn resolve(cfg: &ExperimentConfig, modes: usize, probe_times: &[f64]) -> Result<Resolution> {
    let basis = cfg.basis_with_modes(modes)?;
    let eq = cfg.equation_on(&basis)?;
    let initial = cfg.initial_state(&basis)?;
    let t = &cfg.time;
    let probe_steps: Vec<usize> = probe_times.iter().map(|p| (p / t.dt).round() as usize).collect();
    let mut probes = vec![f64::NAN; probe_times.len()];
    let trajectory = integrate_with(
        &initial,
        &eq,
        t.dt,
        t.t_end,
        t.cadence,
        t.scheme,
        cfg.solver_options(),
        |_, next: &State| {
            let step = (next.t / t.dt).round() as usize;
            for (slot, _) in probes.iter_mut().zip(&probe_steps).filter(|(_, s)| **s == step) {
                *slot = basis.sobolev_norm(&next.v, 1.0);
            }
        },
    )?;
    let oracle = (eq.is_linear() && eq.forcing.is_zero()).then(|| {
        probe_times
            .iter()
            .map(|&p| basis.sobolev_norm(&linear_exact_state(&initial, &eq, p).v, 1.0))
            .collect()
    });
    Ok(Resolution {
        trajectory,
        initial_h1: basis.sobolev_norm(&initial.v, 1.0),
        probes,
        oracle,
    })
}
