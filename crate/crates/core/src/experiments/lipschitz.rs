use rayon::prelude::*;

use super::{max_of, min_of, Check, ExperimentConfig, FitRecord, RunResult, Table};
use crate::diagnostics::{diff_metrics, fit_decay};
use crate::error::Result;
use crate::integrator::{integrate, EquationSpec, State, Trajectory};
use crate::nonlinearity::Kind;
use crate::spectral::Field;

/// Amplification `m(T)/m(0)` of `m = ||∂t v||²_{H⁻¹} + ||v||²_{H¹}` for
/// pairs started `ε` apart along one eigenmode.
pub fn run_lipschitz(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.lipschitz.clone().unwrap_or_default();
    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let base = cfg.initial_state(&basis)?;
    let k = knobs.direction.clone().unwrap_or_else(|| vec![1; basis.dim()]);
    let direction = Field::mode(&basis, &k, 1.0)?;

    let sweep = sweep(cfg, &eq, &base, &direction, &knobs.epsilons)?;
    let columns: Vec<String> = std::iter::once("t".to_string())
        .chain((0..knobs.epsilons.len()).map(|i| format!("m_{i}")))
        .collect();
    let mut series = Table::new("timeseries", &columns);
    for (j, t) in sweep.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(sweep.metrics.iter().map(|m| m[j]));
        series.rows.push(row);
    }
    let mut summary = Table::new("amplification", &["epsilon", "m0", "mT", "ratio"]);
    for (i, &eps) in knobs.epsilons.iter().enumerate() {
        let m = &sweep.metrics[i];
        let (m0, mt) = (m[0], *m.last().expect("samples"));
        summary.rows.push(vec![eps, m0, mt, mt / m0]);
        if m.iter().all(|v| *v > 0.0) && m.len() >= 10 {
            let fit = fit_decay(&sweep.times, m)?;
            result.value(format!("fitted_K_{i}"), -fit.rate);
            result.fits.push(FitRecord::new(format!("difference_growth_{i}"), fit));
        }
    }

    let ratios = sweep.ratios();
    if !ratios.is_empty() {
        let spread = max_of(ratios.iter().copied()) / min_of(ratios.iter().copied());
        result.value("ratio_spread", spread);
        result.checks.push(Check::at_most("amplification bounded across epsilon", spread, knobs.spread_factor));
    }

    if knobs.linear_control {
        let mut lin = eq.clone();
        lin.nonlinearity.phi_kind = Kind::Zero;
        lin.nonlinearity.f_kind = Kind::Zero;
        let control = sweep_ratios(cfg, &lin, &base, &direction, &knobs.epsilons)?;
        if !control.is_empty() {
            let spread = max_of(control.iter().copied()) / min_of(control.iter().copied()) - 1.0;
            result.value("linear_ratio_spread", spread);
            result.checks.push(Check::at_most("linear amplification independent of epsilon", spread, knobs.linear_spread));
        }
    }

    result.tables = vec![series, summary];
    Ok(result)
}

struct Sweep {
    times: Vec<f64>,
    /// `m(t)` per `ε`, in list order.
    metrics: Vec<Vec<f64>>,
}

impl Sweep {
    /// Ratios `m(T)/m(0)` of the pairs with `ε > 0`.
    fn ratios(&self) -> Vec<f64> {
        self.metrics
            .iter()
            .filter(|m| m[0] > 0.0)
            .map(|m| m.last().expect("samples") / m[0])
            .collect()
    }
}

fn sweep(cfg: &ExperimentConfig, eq: &EquationSpec, base: &State, dir: &Field, eps: &[f64]) -> Result<Sweep> {
    let t = &cfg.time;
    let opts = cfg.solver_options();
    let run = |s: &State| integrate(s, eq, t.dt, t.t_end, t.cadence, t.scheme, opts);
    let reference = run(base)?;
    let perturbed = eps
        .par_iter()
        .map(|&e| {
            let start = State::new(&base.u + &dir.scaled(e), base.v.clone(), base.t)?;
            run(&start)
        })
        .collect::<Vec<Result<Trajectory>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let metrics = perturbed
        .iter()
        .map(|p| {
            p.samples
                .iter()
                .zip(&reference.samples)
                .map(|(a, b)| diff_metrics(&a.state, &b.state, eq.gamma).map(|d| d.squared_norm()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep {
        times: reference.times(),
        metrics,
    })
}

fn sweep_ratios(cfg: &ExperimentConfig, eq: &EquationSpec, base: &State, dir: &Field, eps: &[f64]) -> Result<Vec<f64>> {
    Ok(sweep(cfg, eq, base, dir, eps)?.ratios())
}
