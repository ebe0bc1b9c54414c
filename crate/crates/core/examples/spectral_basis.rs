//! Builds a sine basis, moves a field to the grid and back, and compares
//! pseudo-spectral and exact derivatives.

use std::f64::consts::PI;

use qsdw::spectral::{Basis, Field};

fn main() -> qsdw::Result<()> {
    let basis = Basis::new(1, 16, &[PI], 24)?;
    println!("modes {}, grid points {}, λ₁ = {}", basis.len(), basis.grid_points(), basis.first_eigenvalue());

    let coeffs: Vec<f64> = (1..=16).map(|k| 1.0 / (k * k * k) as f64).collect();
    let u = Field::from_coeffs(&basis, coeffs)?;
    let back = basis.to_spectral(&basis.to_grid(&u))?;
    let round_trip = u.coeffs().iter().zip(back.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("grid round trip error {round_trip:.2e}");

    let lap = basis.div_from_grid(&basis.grad_to_grid(&u))?;
    let exact = basis.laplacian(&u);
    let gap = lap.coeffs().iter().zip(exact.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("div(grad u) vs Δu {gap:.2e}");

    for s in [-1.0, 0.0, 1.0, 2.0] {
        println!("|u|_H^{s} = {:.6}", basis.sobolev_norm(&u, s));
    }
    let l4 = basis.lp_norm(&basis.to_grid(&u), 4.0)?;
    println!("|u|_L4 = {l4:.6}");

    // M below 3N/2 is rejected
    if let Err(e) = Basis::new(1, 16, &[PI], 20) {
        println!("{e}");
    }
    Ok(())
}
