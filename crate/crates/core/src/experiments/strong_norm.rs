use super::{half_maxima, timeseries_row, Check, ExperimentConfig, RunResult, Table, TIMESERIES_COLUMNS};
use crate::diagnostics::{balance_residual, default_alpha};
use crate::error::Result;
use crate::integrator::integrate;

/// Records `||u||_{H²}` and `||∂t u||_{H¹}` and checks that neither grows
/// over the second half of the run.
pub fn run_strong_norm(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.strong_norm.clone().unwrap_or_default();
    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let initial = cfg.initial_state(&basis)?;
    let t = &cfg.time;
    let run = integrate(&initial, &eq, t.dt, t.t_end, t.cadence, t.scheme, cfg.solver_options())?;

    let alpha = default_alpha(&eq);
    let balance = balance_residual(&run, &eq)?;
    let mut series = Table::new("timeseries", &TIMESERIES_COLUMNS);
    for (j, sample) in run.samples.iter().enumerate() {
        let r = if j == 0 { 0.0 } else { balance.residuals[j - 1] };
        series.rows.push(timeseries_row(&sample.state, &eq, alpha, r)?);
    }
    let times = run.times();
    let h2 = series.column("h2_u").expect("column");
    let h1_dt = series.column("h1_dtu").expect("column");

    let (late, early) = half_maxima(&times, &h2);
    result.value("h2_u_max_late", late);
    result.value("h2_u_max_early", early);
    result.checks.push(Check::at_most("H2 norm of u does not grow", late, early));
    let (late, early) = half_maxima(&times, &h1_dt);
    result.value("h1_dtu_max_late", late);
    result.value("h1_dtu_max_early", early);
    result.checks.push(Check::at_most("H1 norm of velocity does not grow", late, early));

    let mut tables = vec![series];
    if knobs.limit_diagnostic {
        // ∫ ||∇u||⁶_{L¹⁸} over [k, k+1], trapezoid over the samples
        let values = run
            .samples
            .iter()
            .map(|s| Ok(basis.lp_norm_vector(&basis.grad_to_grid(&s.state.u), 18.0)?.powi(6)))
            .collect::<Result<Vec<f64>>>()?;
        let mut windows = Table::new("limit_windows", &["window_start", "integral"]);
        let last = t.t_end.floor() as usize;
        for k in 0..last.max(1) {
            let (a, b) = (k as f64, (k + 1) as f64);
            let integral: f64 = times
                .windows(2)
                .zip(values.windows(2))
                .filter(|(w, _)| w[0] >= a - 1e-12 && w[1] <= b + 1e-12)
                .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
                .sum();
            windows.rows.push(vec![a, integral]);
        }
        tables.push(windows);
    }
    result.tables = tables;
    Ok(result)
}
