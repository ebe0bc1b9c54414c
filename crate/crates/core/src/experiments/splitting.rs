use super::{half_maxima, max_of, Check, ExperimentConfig, FitRecord, RunResult, Table};
use crate::diagnostics::fit_decay;
use crate::error::{Error, Result};
use crate::integrator::{
    integrate_with, rhs_accel, step_pseudoparabolic, step_splitting_remainder, EquationSpec, Scheme,
    SolverOptions, State,
};
use crate::nonlinearity::{validate_conditions, Kind, NonlinearitySpec};
use crate::spectral::Field;

/// Default shift `L = Ĉ + 1`, `Ĉ` the sampled lower bound `f'(s) >= -Ĉ`.
pub fn default_shift(nl: &NonlinearitySpec) -> Result<f64> {
    let report = validate_conditions(nl, 10_000, (1e-3, 1e3), 0)?;
    Ok(report.c_hat.unwrap_or(0.0) + 1.0)
}

struct Split {
    times: Vec<f64>,
    u_h1: Vec<f64>,
    w_h2: Vec<f64>,
    v_h1: Vec<f64>,
    /// `||u - (v + w)||_{L²}` with `v` from the remainder equation
    consistency: Vec<f64>,
}

/// Decomposes `u = v + w`: `w` solves the pseudoparabolic equation forced
/// by `h_u = -∂t²u + g + Lu` from `w(0) = 0`, and `v` solves the remainder
/// equation from `v(0) = u(0)`.
pub fn run_splitting(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut result = RunResult::new(cfg)?;
    let knobs = cfg.splitting.clone().unwrap_or_default();
    let basis = cfg.basis()?;
    let eq = cfg.equation_on(&basis)?;
    let initial = cfg.initial_state(&basis)?;
    let shift = match knobs.shift {
        Some(l) => l,
        None => default_shift(&eq.nonlinearity)?,
    };
    result.value("shift", shift);

    let main = split(cfg, &eq, &initial, shift)?;
    let mut table = Table::new("timeseries", &["t", "h1_u", "h2_w", "h1_v", "consistency_l2"]);
    for i in 0..main.times.len() {
        table.rows.push(vec![main.times[i], main.u_h1[i], main.w_h2[i], main.v_h1[i], main.consistency[i]]);
    }

    let worst = max_of(main.consistency.iter().copied());
    result.value("max_consistency_l2", worst);
    result
        .checks
        .push(Check::at_most("splitting consistency", worst, knobs.consistency_tol).consistency());

    let (late, early) = half_maxima(&main.times, &main.w_h2);
    result.value("w_h2_max_late", late);
    result.value("w_h2_max_early", early);
    result.checks.push(Check::at_most("w bounded in H2", late, early));

    if let Some(fit) = remainder_fit(&main)? {
        result.fits.push(FitRecord::new("remainder_h1_decay", fit));
        result.checks.push(Check::above("remainder decays in H1", fit.rate, 0.0));
        result.checks.push(Check::at_least("remainder decay fit r2", fit.r_squared, knobs.r_squared_min));
    }

    if knobs.linear_control {
        let mut lin = eq.clone();
        lin.nonlinearity.phi_kind = Kind::Zero;
        lin.nonlinearity.f_kind = Kind::Zero;
        lin.forcing = Field::zeros(&basis);
        let first = vec![1; basis.dim()];
        let start = State::new(Field::mode(&basis, &first, 1.0)?, Field::zeros(&basis), 0.0)?;
        let control = split(cfg, &lin, &start, shift)?;
        let l1 = basis.first_eigenvalue();
        let expected = (l1 + shift) / (eq.gamma * l1);
        result.value("linear_control_expected_rate", expected);
        if let Some(fit) = remainder_fit(&control)? {
            result.fits.push(FitRecord::new("linear_control_remainder_h1_decay", fit));
            let err = (fit.rate - expected).abs() / expected;
            result.checks.push(Check::at_most("linear remainder rate matches closed form", err, knobs.rate_tolerance));
        }
    }

    result.tables = vec![table];
    Ok(result)
}

fn remainder_fit(split: &Split) -> Result<Option<crate::diagnostics::DecayFit>> {
    let floor = 1e-10 * split.v_h1[0].max(f64::MIN_POSITIVE);
    let (ts, ys): (Vec<f64>, Vec<f64>) = split
        .times
        .iter()
        .zip(&split.v_h1)
        .filter(|(_, v)| **v > floor)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if ts.len() < 10 {
        return Ok(None);
    }
    fit_decay(&ts, &ys).map(Some)
}

fn split(cfg: &ExperimentConfig, eq: &EquationSpec, initial: &State, shift: f64) -> Result<Split> {
    let basis = eq.basis().clone();
    let opts: SolverOptions = cfg.solver_options();
    let t = &cfg.time;
    let mut w = Field::zeros(&basis);
    let mut v = initial.u.clone();
    let mut failure: Option<Error> = None;
    let mut out = Split {
        times: vec![initial.t],
        u_h1: vec![basis.sobolev_norm(&initial.u, 1.0)],
        w_h2: vec![0.0],
        v_h1: vec![basis.sobolev_norm(&v, 1.0)],
        consistency: vec![0.0],
    };
    let mut step = 0usize;
    integrate_with(initial, eq, t.dt, t.t_end, t.cadence, Scheme::Midpoint, opts, |prev, next| {
        step += 1;
        if failure.is_some() {
            return;
        }
        let advance = || -> Result<(Field, Field)> {
            let mid = State {
                u: prev.u.midpoint(&next.u),
                v: prev.v.midpoint(&next.v),
                t: 0.5 * (prev.t + next.t),
            };
            let h = &(&eq.forcing - &rhs_accel(&mid, eq)?) + &mid.u.scaled(shift);
            let w_next = step_pseudoparabolic(&w, t.dt, shift, &h, eq, opts)?;
            let v_next = step_splitting_remainder(&v, t.dt, shift, &w, &w_next, eq, opts)?;
            Ok((w_next, v_next))
        };
        match advance() {
            Ok((w_next, v_next)) => {
                w = w_next;
                v = v_next;
            }
            Err(e) => {
                failure = Some(Error::AtTime {
                    t: prev.t,
                    source: Box::new(e),
                });
                return;
            }
        }
        if step.is_multiple_of(t.cadence) {
            out.times.push(next.t);
            out.u_h1.push(basis.sobolev_norm(&next.u, 1.0));
            out.w_h2.push(basis.sobolev_norm(&w, 2.0));
            out.v_h1.push(basis.sobolev_norm(&v, 1.0));
            out.consistency.push((&(&next.u - &v) - &w).l2_norm());
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
