//! Tracks the energy of a cubic problem and checks that it drops by exactly
//! the dissipated amount.

use std::f64::consts::PI;

use qsdw::diagnostics::{balance_residual, default_alpha, energy_norm, energy_report};
use qsdw::integrator::{integrate, EquationSpec, Scheme, SolverOptions, State};
use qsdw::nonlinearity::NonlinearitySpec;
use qsdw::spectral::{Basis, Field};

fn main() -> qsdw::Result<()> {
    let basis = Basis::new(1, 32, &[PI], 48)?;
    let eq = EquationSpec::main(&basis, 1.0, NonlinearitySpec::power(3.0, 2.0, 0.0));
    let u = &Field::mode(&basis, &[1], 1.0)? + &Field::mode(&basis, &[2], 0.3)?;
    let init = State::new(u, Field::mode(&basis, &[1], 0.5)?, 0.0)?;
    let alpha = default_alpha(&eq);

    for dt in [2e-3, 1e-3] {
        let cadence = (0.1 / dt) as usize;
        let traj = integrate(&init, &eq, dt, 1.0, cadence, Scheme::Midpoint, SolverOptions::default())?;
        println!("dt {dt}: max balance residual {:.3e}", balance_residual(&traj, &eq)?.max_abs);
        if dt == 1e-3 {
            for s in &traj.samples {
                let e = energy_report(&s.state, &eq, alpha)?;
                println!(
                    "  t {:.1}  E {:.6}  modified {:.6}  |ξ|_E {:.6}",
                    s.state.t,
                    e.total,
                    e.modified_total,
                    energy_norm(&s.state, &eq)?
                );
            }
        }
    }
    Ok(())
}
