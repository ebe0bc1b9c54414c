//! Runs the Kirchhoff, membrane and structural families from the same data
//! and prints the family validators.

use std::f64::consts::PI;

use qsdw::diagnostics::energy_report;
use qsdw::integrator::{integrate, EquationSpec, Family, Scheme, SolverOptions, State};
use qsdw::nonlinearity::NonlinearitySpec;
use qsdw::spectral::{Basis, Field};
use qsdw::variants::{membrane_energy, membrane_strong_norm, validate_kirchhoff, validate_structural};

fn main() -> qsdw::Result<()> {
    let basis = Basis::new(1, 16, &[PI], 24)?;
    let init = State::new(Field::mode(&basis, &[1], 0.8)?, Field::mode(&basis, &[2], 0.4)?, 0.0)?;
    let nl = NonlinearitySpec::power(3.0, 2.0, 0.0);
    let zero = Field::zeros(&basis);
    let families = [
        ("kirchhoff m=2", EquationSpec::new(Family::Kirchhoff, 1.0, nl, zero.clone()).with_kirchhoff_m(2.0)),
        ("membrane", EquationSpec::new(Family::Membrane, 1.0, NonlinearitySpec::power(2.0, 2.0, 0.0), zero.clone())),
        ("structural α=0.75", EquationSpec::new(Family::Structural, 1.0, nl, zero).with_alpha(0.75)),
    ];
    for (name, eq) in &families {
        let traj = integrate(&init, eq, 1e-3, 1.0, 250, Scheme::Midpoint, SolverOptions::default())?;
        for s in &traj.samples {
            let e = if eq.family == Family::Membrane {
                membrane_energy(&s.state, eq)?
            } else {
                energy_report(&s.state, eq, 0.0)?
            };
            println!("{name:<18} t {:.2}  E {:.6}", s.state.t, e.total);
        }
        if eq.family == Family::Membrane {
            println!("{name:<18} |Δu|_L2p at T = {:.6}", membrane_strong_norm(traj.last(), eq)?);
        }
    }

    for (alpha, q) in [(0.5, 3.0), (0.5, 4.5), (0.75, 10.0)] {
        let r = validate_structural(alpha, q)?;
        println!("structural α={alpha} q={q}: passed {} margin {}", r.passed, r.margin);
    }
    let samples: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
    let r = validate_kirchhoff(3.0, &samples)?;
    println!("kirchhoff m=3: passed {} margin {}", r.passed, r.margin);
    Ok(())
}
