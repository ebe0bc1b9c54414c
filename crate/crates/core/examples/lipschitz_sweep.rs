//! Perturbs smooth cubic data by ε along a fixed direction and prints how
//! the E₋₁ distance between the two solutions evolves.

use std::f64::consts::PI;

use qsdw::diagnostics::diff_metrics;
use qsdw::integrator::{integrate, EquationSpec, Scheme, SolverOptions, State};
use qsdw::nonlinearity::NonlinearitySpec;
use qsdw::spectral::{Basis, Field};

fn main() -> qsdw::Result<()> {
    let basis = Basis::new(1, 16, &[PI], 24)?;
    let gamma = 1.0;
    let eq = EquationSpec::main(&basis, gamma, NonlinearitySpec::power(3.0, 2.0, 0.0));
    let u = Field::mode(&basis, &[1], 1.0)?;
    let base = State::new(u.clone(), Field::zeros(&basis), 0.0)?;
    let direction = Field::mode(&basis, &[3], 1.0)?;
    let opts = SolverOptions::default();
    let reference = integrate(&base, &eq, 1e-2, 2.0, 20, Scheme::Midpoint, opts)?;

    for eps in [1e-2, 1e-3, 1e-4] {
        let perturbed = State::new(&u + &direction.scaled(eps), Field::zeros(&basis), 0.0)?;
        let traj = integrate(&perturbed, &eq, 1e-2, 2.0, 20, Scheme::Midpoint, opts)?;
        let m0 = diff_metrics(&base, &perturbed, gamma)?.squared_norm();
        let ratios: Vec<String> = reference
            .samples
            .iter()
            .zip(&traj.samples)
            .map(|(a, b)| diff_metrics(&a.state, &b.state, gamma).map(|d| format!("{:.3}", d.squared_norm() / m0)))
            .collect::<qsdw::Result<_>>()?;
        println!("ε {eps:.0e}: m(t)/m(0) = {}", ratios.join(" "));
    }
    Ok(())
}
