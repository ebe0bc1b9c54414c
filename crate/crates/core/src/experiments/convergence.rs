use rayon::prelude::*;

use super::{max_of, min_of, Check, ExperimentConfig, RunResult, Table};
use crate::error::Result;
use crate::integrator::{integrate, linear_exact_state, step_count, Scheme, State};

/// Observed order in `dt` (against the modal closed form for linear
/// unforced problems, from successive differences otherwise) and, when
/// `modes` is set, spectral convergence in `N` against a finer reference.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.convergence.clone().unwrap_or_default();
    let dt = cfg.time.dt;
    let dts = knobs.dts.clone().unwrap_or_else(|| vec![dt, dt / 2.0, dt / 4.0]);
    let expected = match cfg.time.scheme {
        Scheme::Rk4Oracle => 4.0,
        _ => 2.0,
    };
    result.value("expected_order", expected);

    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let initial = cfg.initial_state(&basis)?;
    let finals = dts
        .par_iter()
        .map(|&h| final_state(cfg, cfg.grid.n, h))
        .collect::<Vec<Result<State>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let oracle = (eq.is_linear() && eq.forcing.is_zero())
        .then(|| linear_exact_state(&initial, &eq, cfg.time.t_end));
    let mut table = Table::new("time_convergence", &["dt", "error", "ratio", "order"]);
    let errors: Vec<f64> = match &oracle {
        Some(exact) => finals.iter().map(|s| distance(s, exact)).collect(),
        None => finals.windows(2).map(|w| distance(&w[0], &w[1])).collect(),
    };
    let mut orders = Vec::new();
    for (i, e) in errors.iter().enumerate() {
        let (ratio, order) = if i == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let r = errors[i - 1] / e;
            (r, r.ln() / (dts[i - 1] / dts[i]).ln())
        };
        if i > 0 {
            orders.push(order);
        }
        table.rows.push(vec![dts[i], *e, ratio, order]);
    }
    if !orders.is_empty() {
        let worst = max_of(orders.iter().map(|o| (o - expected).abs()));
        result.value("worst_order_deviation", worst);
        let name = if oracle.is_some() {
            "time order against closed form"
        } else {
            "time order from successive differences"
        };
        result.checks.push(Check::at_most(name, worst, 0.1 * expected));
    }
    let mut tables = vec![table];

    if let Some(modes) = knobs.modes.clone() {
        let reference_modes = knobs
            .reference_modes
            .unwrap_or_else(|| 2 * modes.iter().copied().max().unwrap_or(cfg.grid.n));
        let mut all = modes.clone();
        all.push(reference_modes);
        let states = all
            .par_iter()
            .map(|&n| final_state(cfg, n, dt))
            .collect::<Vec<Result<State>>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let reference = states.last().expect("reference run");
        let errors: Vec<f64> = states[..modes.len()].iter().map(|s| spectral_distance(s, reference)).collect();
        let mut table = Table::new("space_convergence", &["N", "error", "ratio"]);
        let floor = 1e-12;
        let mut ratios = Vec::new();
        for (i, e) in errors.iter().enumerate() {
            let ratio = if i == 0 { f64::NAN } else { errors[i - 1] / e };
            if i > 0 {
                // both errors at the rounding floor count as converged
                ratios.push(if *e < floor { f64::INFINITY } else { ratio });
            }
            table.rows.push(vec![modes[i] as f64, *e, ratio]);
        }
        if !ratios.is_empty() {
            let worst = min_of(ratios);
            result.value("worst_space_ratio", worst);
            result.checks.push(Check::at_least("spectral convergence in N", worst, 10.0));
        }
        tables.push(table);
    }
    result.tables = tables;
    Ok(result)
}

fn final_state(cfg: &ExperimentConfig, modes: usize, dt: f64) -> Result<State> {
    let basis = cfg.basis_with_modes(modes)?;
    let eq = cfg.equation_on(&basis)?;
    let initial = cfg.initial_state(&basis)?;
    let steps = step_count(dt, cfg.time.t_end)?;
    let run = integrate(&initial, &eq, dt, cfg.time.t_end, steps.max(1), cfg.time.scheme, cfg.solver_options())?;
    Ok(run.last().clone())
}

/// `||Δu||_{L²} + ||Δv||_{L²}` on one basis.
fn distance(a: &State, b: &State) -> f64 {
    (&a.u - &b.u).l2_norm() + (&a.v - &b.v).l2_norm()
}

/// [`distance`] between states on nested bases, the finer one `reference`;
/// modes absent from `a` count in full.
fn spectral_distance(a: &State, reference: &State) -> f64 {
    let (ba, br) = (a.basis(), reference.basis());
    let mut sq = [0.0f64; 2];
    for (slot, (fa, fr)) in sq.iter_mut().zip([(&a.u, &reference.u), (&a.v, &reference.v)]) {
        for (j, cr) in fr.coeffs().iter().enumerate() {
            let k = br.mode_index(j);
            let ca = ba.flat_index(&k).map(|i| fa.coeffs()[i]).unwrap_or(0.0);
            *slot += (ca - cr).powi(2);
        }
        *slot *= br.mass();
    }
    sq[0].sqrt() + sq[1].sqrt()
}
