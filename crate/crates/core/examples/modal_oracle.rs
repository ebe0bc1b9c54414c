//! Integrates the linear problem with each scheme and measures the error
//! against the closed-form modal solution as the step is halved.

use std::f64::consts::PI;

use qsdw::integrator::{integrate, linear_exact_state, step_count, EquationSpec, Scheme, SolverOptions, State};
use qsdw::nonlinearity::NonlinearitySpec;
use qsdw::spectral::{Basis, Field};

fn main() -> qsdw::Result<()> {
    let basis = Basis::new(1, 8, &[PI], 12)?;
    let eq = EquationSpec::main(&basis, 1.0, NonlinearitySpec::linear());
    let u = Field::from_coeffs(&basis, (1..=8).map(|k| 1.0 / (k * k) as f64).collect())?;
    let v = Field::from_coeffs(&basis, (1..=8).map(|k| 1.0 / k as f64).collect())?;
    let init = State::new(u, v, 0.0)?;
    let exact = linear_exact_state(&init, &eq, 1.0);

    for scheme in [Scheme::Midpoint, Scheme::Imex, Scheme::Rk4Oracle] {
        let mut previous = None;
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let steps = step_count(dt, 1.0)?;
            let traj = integrate(&init, &eq, dt, 1.0, steps, scheme, SolverOptions::default())?;
            let last = traj.last();
            let err = (&last.u - &exact.u).l2_norm() + (&last.v - &exact.v).l2_norm();
            let ratio = previous.map(|p: f64| p / err);
            println!("{:<10} dt {dt:<7} error {err:.3e} ratio {:?}", scheme.name(), ratio);
            previous = Some(err);
        }
    }
    Ok(())
}
