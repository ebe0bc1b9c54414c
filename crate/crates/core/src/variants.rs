//! Validators and energies specific to the Kirchhoff, membrane and
//! structural-damping families. Time stepping and the generic diagnostics
//! handle these families directly through [`EquationSpec`].

use serde::Serialize;

use crate::diagnostics::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::integrator::{EquationSpec, Family, State};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantValidatorReport {
    pub family: Family,
    pub condition: String,
    pub passed: bool,
    /// Smallest slack observed; `f64::INFINITY` for unconditional passes.
    pub margin: f64,
    pub note: Option<String>,
}

/// Sign condition `Φ(s)s - ∫₀ˢ Φ >= 0` for `Φ(s) = s^m`, i.e.
/// `s^{m+1} m / (m + 1) >= 0`, over the given samples `s >= 0`.
pub fn validate_kirchhoff(m: f64, samples: &[f64]) -> Result<VariantValidatorReport> {
    const OP: &str = "validate_kirchhoff";
    if !(m >= 1.0) {
        return Err(Error::invalid(OP, format!("m = {m} must be >= 1")));
    }
    if let Some(s) = samples.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::invalid(OP, format!("samples must be >= 0, got {s}")));
    }
    let margin = samples
        .iter()
        .map(|&s| {
            let phi = s.powf(m);
            phi * s - s.powf(m + 1.0) / (m + 1.0)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(VariantValidatorReport {
        family: Family::Kirchhoff,
        condition: "Kirchhoff sign condition Φ(s)s - ∫Φ >= 0".into(),
        passed: margin >= 0.0,
        margin,
        note: None,
    })
}

/// Growth restriction `q + 2 < 6 / (3 - 4α)` for structural damping with
/// `α < 3/4`; unconditional for `α >= 3/4`. The bound is the
/// three-dimensional condition and is informational for `d ∈ {1, 2}`.
pub fn validate_structural(alpha: f64, q: f64) -> Result<VariantValidatorReport> {
    const OP: &str = "validate_structural";
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::invalid(OP, format!("alpha = {alpha} outside [1/2, 1]")));
    }
    let note = Some("three-dimensional growth condition; informational in d = 1, 2".to_string());
    let condition = "structural damping growth bound q + 2 < 6 / (3 - 4α)".to_string();
    if alpha >= 0.75 {
        return Ok(VariantValidatorReport {
            family: Family::Structural,
            condition,
            passed: true,
            margin: f64::INFINITY,
            note,
        });
    }
    let margin = 6.0 / (3.0 - 4.0 * alpha) - (q + 2.0);
    Ok(VariantValidatorReport {
        family: Family::Structural,
        condition,
        passed: margin > 0.0,
        margin,
        note,
    })
}

/// Energy `½||Δu||² + (Φ(Δu), 1) + ½||∂t u||² + (F(u), 1) - (g, u)` of the
/// hinged membrane, with `Φ(θ) = |θ|^{p+1} / (p + 1)`.
pub fn membrane_energy(state: &State, eq: &EquationSpec) -> Result<EnergyReport> {
    if eq.family != Family::Membrane {
        return Err(Error::invalid(
            "membrane_energy",
            format!("expected the membrane family, got {:?}", eq.family),
        ));
    }
    energy_report(state, eq, 0.0)
}

/// `||Δu||_{L^{2p}}`, the strong-space diagnostic for the membrane.
pub fn membrane_strong_norm(state: &State, eq: &EquationSpec) -> Result<f64> {
    let basis = eq.basis();
    let lap = basis.to_grid(&basis.laplacian(&state.u));
    basis.lp_norm(&lap, 2.0 * eq.nonlinearity.p)
}
