//! Samples the growth and monotonicity constants of the power nonlinearity
//! for a few exponents.

use qsdw::nonlinearity::{monotonicity_gap, validate_conditions, NonlinearitySpec};

fn main() -> qsdw::Result<()> {
    for p in [1.0, 2.0, 3.0, 4.9] {
        let spec = NonlinearitySpec::power(p, 2.0, 0.5);
        let report = validate_conditions(&spec, 10_000, (1e-3, 1e3), 0)?;
        println!(
            "p = {p}: a0 {:?}, a1 {:?}, C {:?}, gap {:?}, passed {}",
            report.a0_hat, report.a1_hat, report.c_hat, report.delta_hat, report.passed
        );
    }

    let cubic = NonlinearitySpec::power(3.0, 2.0, 0.0);
    for (a, b) in [(0.0, 1.0), (-2.0, 3.0), (10.0, 10.5)] {
        println!("gap({a}, {b}) = {:.4}", monotonicity_gap(a, b, &cubic)?);
    }

    if let Err(e) = NonlinearitySpec::power(5.0, 2.0, 0.0).validate(false) {
        println!("{e}");
    }
    Ok(())
}
