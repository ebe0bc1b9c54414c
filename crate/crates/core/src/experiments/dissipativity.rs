use rayon::prelude::*;

use super::{max_of, min_of, scaled_state, timeseries_row, Check, ExperimentConfig, FitRecord, RunResult, Table, TIMESERIES_COLUMNS};
use crate::diagnostics::{balance_residual, default_alpha, fit_decay};
use crate::error::Result;
use crate::integrator::{integrate, Trajectory};

/// Integrates the configured data at every magnitude and checks either
/// monotone energy decay (unforced, `C_f = 0`) or entry into a common
/// terminal band (forced).
pub fn run_dissipativity(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.dissipativity.clone().unwrap_or_default();
    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let base = cfg.initial_state(&basis)?;
    let alpha = default_alpha(&eq);
    let opts = cfg.solver_options();
    let t = &cfg.time;

    let runs = knobs
        .magnitudes
        .par_iter()
        .map(|&m| integrate(&scaled_state(&base, m), &eq, t.dt, t.t_end, t.cadence, t.scheme, opts))
        .collect::<Vec<Result<Trajectory>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut tables = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let balance = balance_residual(run, &eq)?;
        let name = if i == 0 { "timeseries".to_string() } else { format!("timeseries_{i}") };
        let mut table = Table::new(name, &TIMESERIES_COLUMNS);
        for (j, sample) in run.samples.iter().enumerate() {
            let r = if j == 0 { 0.0 } else { balance.residuals[j - 1] };
            table.rows.push(timeseries_row(&sample.state, &eq, alpha, r)?);
        }
        result.value(format!("max_balance_residual_{i}"), balance.max_abs);
        tables.push(table);
    }

    let times = runs[0].times();
    let energies: Vec<Vec<f64>> = tables.iter().map(|t| t.column("E").expect("column")).collect();
    let norms: Vec<Vec<f64>> = tables.iter().map(|t| t.column("energy_norm").expect("column")).collect();

    for (i, n) in norms.iter().enumerate() {
        let hit = times.iter().zip(n).find(|(_, v)| **v < knobs.decay_level).map(|(t, _)| *t);
        result.value(format!("time_below_level_{i}"), hit.unwrap_or(f64::NAN));
    }

    let unforced = eq.forcing.is_zero() && eq.nonlinearity.c_f == 0.0;
    if unforced {
        let increase = max_of(energies.iter().map(|e| {
            let scale = e[0].abs().max(1.0);
            max_of(e.windows(2).map(|w| (w[1] - w[0]) / scale)).max(0.0)
        }));
        result.checks.push(Check::at_most("energy monotone decay", increase, knobs.energy_slack));

        for (i, e) in energies.iter().enumerate() {
            // amplitude decay: fit √E on the tail, above the rounding floor
            let floor = 1e-24 * e[0].abs().max(f64::MIN_POSITIVE);
            let (ts, ys): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(e)
                .filter(|(t, v)| **t >= 0.25 * cfg.time.t_end && **v > floor)
                .map(|(t, v)| (*t, v.sqrt()))
                .unzip();
            if ts.len() >= 10 {
                let fit = fit_decay(&ts, &ys)?;
                result.fits.push(FitRecord::new(format!("energy_amplitude_{i}"), fit));
            }
        }

        if eq.is_linear() && !(base.u.is_zero() && base.v.is_zero()) {
            let oracle = slowest_modal_rate(&eq, &base);
            result.value("oracle_rate", oracle);
            if let Some(fit) = result.fits.first() {
                let err = (fit.rate - oracle).abs() / oracle;
                result.checks.push(Check::at_most("linear decay rate matches slowest mode", err, knobs.rate_tolerance));
            }
        }
    } else {
        let terminal: Vec<f64> = norms.iter().map(|n| *n.last().expect("samples")).collect();
        let band = terminal.iter().sum::<f64>() / terminal.len() as f64;
        let spread = (max_of(terminal.iter().copied()) - min_of(terminal.iter().copied())) / band;
        result.value("terminal_band", band);
        result.checks.push(Check::at_most("common terminal band", spread, knobs.band_tolerance));

        // approach to the terminal state of the first run
        let target = runs[0].last();
        let mut rates = Vec::new();
        for (i, run) in runs.iter().enumerate() {
            let dist: Vec<f64> = run
                .samples
                .iter()
                .map(|s| {
                    basis.sobolev_norm(&(&s.state.u - &target.u), 1.0) + (&s.state.v - &target.v).l2_norm()
                })
                .collect();
            let floor = 1e-8 * (1.0 + max_of(dist.iter().copied()));
            let (ts, ys): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&dist)
                .filter(|(t, d)| **t <= 0.9 * cfg.time.t_end && **d > floor)
                .map(|(t, d)| (*t, *d))
                .unzip();
            if ts.len() >= 10 {
                let fit = fit_decay(&ts, &ys)?;
                rates.push(fit.rate);
                result.fits.push(FitRecord::new(format!("approach_{i}"), fit));
            }
        }
        if !rates.is_empty() {
            result.checks.push(Check::above("approach rates positive", min_of(rates), 0.0));
        }
    }

    result.tables = tables;
    Ok(result)
}

/// `min_k |Re r₊(k)|` over modes carrying initial data, `r₊` the slower
/// root of `r² + d_k r + s_k = 0`.
fn slowest_modal_rate(eq: &crate::integrator::EquationSpec, state: &crate::integrator::State) -> f64 {
    eq.modal_coefficients()
        .iter()
        .zip(state.u.coeffs().iter().zip(state.v.coeffs()))
        .filter(|(_, (u, v))| **u != 0.0 || **v != 0.0)
        .map(|(&(d, s), _)| {
            let disc = d * d - 4.0 * s;
            if disc > 0.0 {
                (d - disc.sqrt()) / 2.0
            } else {
                d / 2.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}
