//! Energy functionals, difference metrics, the discrete energy balance and
//! exponential-rate fitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{EquationSpec, Family, State, Trajectory};

/// Components of the energy. `dirichlet` holds `½||∇u||²`, or `½||Δu||²`
/// for the membrane family; `phi_potential` holds `(φ(∇u), 1)`, the
/// membrane potential `(Φ(Δu), 1)` or the Kirchhoff term `½Φ̃(||∇u||²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub dirichlet: f64,
    pub phi_potential: f64,
    pub f_potential: f64,
    pub forcing: f64,
    pub total: f64,
    /// `total + αγ/2 ||∇u||² + α(∂t u, u)`
    pub modified_total: f64,
    pub alpha_used: f64,
}

/// Multiplier weight `min(γλ₁/4, λ₁/4)`: with the Poincaré constant
/// `1/λ₁` this keeps `||∇∂t u||² >= 2α||∂t u||²` on every resolved mode.
pub fn default_alpha(eq: &EquationSpec) -> f64 {
    let l1 = eq.basis().first_eigenvalue();
    (eq.gamma * l1 / 4.0).min(l1 / 4.0)
}

pub fn energy_report(state: &State, eq: &EquationSpec, alpha: f64) -> Result<EnergyReport> {
    const OP: &str = "energy_report";
    if !(alpha >= 0.0) {
        return Err(Error::invalid(OP, format!("alpha = {alpha} must be >= 0")));
    }
    if !state.u.shares_basis(&eq.forcing) || !state.v.shares_basis(&eq.forcing) {
        return Err(Error::BasisMismatch { op: OP });
    }
    let basis = eq.basis();
    let nl = &eq.nonlinearity;
    let (u, v) = (&state.u, &state.v);

    let kinetic = 0.5 * v.l2_norm().powi(2);
    let grad_sq = basis.sobolev_norm(u, 1.0).powi(2);
    let dirichlet = match eq.family {
        Family::Membrane => 0.5 * basis.sobolev_norm(u, 2.0).powi(2),
        _ => 0.5 * grad_sq,
    };
    let phi_potential = if !nl.has_phi() {
        0.0
    } else {
        match eq.family {
            Family::Main => {
                let grads = basis.grad_to_grid(u);
                let mag = crate::spectral::magnitude(&grads)?;
                basis.integrate(&mag.map(|e| nl.phi(e)))?
            }
            Family::Kirchhoff => {
                let m = eq.kirchhoff_m;
                0.5 * grad_sq.powf(m + 1.0) / (m + 1.0)
            }
            Family::Membrane => {
                let lap = basis.to_grid(&basis.laplacian(u));
                basis.integrate(&lap.map(|t| nl.membrane_big_phi(t)))?
            }
            Family::Structural => 0.0,
        }
    };
    let f_potential = if nl.has_f() {
        basis.integrate(&basis.to_grid(u).map(|s| nl.big_f(s)))?
    } else {
        0.0
    };
    let forcing = -basis.inner(&eq.forcing, u)?;
    let total = kinetic + dirichlet + phi_potential + f_potential + forcing;
    let modified_total = total + alpha * eq.gamma / 2.0 * grad_sq + alpha * basis.inner(v, u)?;
    Ok(EnergyReport {
        kinetic,
        dirichlet,
        phi_potential,
        f_potential,
        forcing,
        total,
        modified_total,
        alpha_used: alpha,
    })
}

/// `||∂t u||² + ||∇u||^{p+1}_{L^{p+1}} + ||u||^{q+2}_{L^{q+2}}`, a sum of
/// powers rather than a norm. With `φ = 0` the gradient term is `||∇u||²`;
/// with `f = 0` the displacement term is dropped. The membrane family
/// uses `Δu` in place of `∇u`.
pub fn energy_norm(state: &State, eq: &EquationSpec) -> Result<f64> {
    let basis = eq.basis();
    let nl = &eq.nonlinearity;
    let u = &state.u;
    let kinetic = state.v.l2_norm().powi(2);
    let (grad_term, order) = match eq.family {
        Family::Membrane => (basis.to_grid(&basis.laplacian(u)), 2.0),
        _ => {
            let grads = basis.grad_to_grid(u);
            (crate::spectral::magnitude(&grads)?, 1.0)
        }
    };
    let gradient = if nl.has_phi() && matches!(eq.family, Family::Main | Family::Membrane) {
        basis.lp_norm(&grad_term, nl.p + 1.0)?.powf(nl.p + 1.0)
    } else {
        basis.sobolev_norm(u, order).powi(2)
    };
    let displacement = if nl.has_f() {
        basis.lp_norm(&basis.to_grid(u), nl.q + 2.0)?.powf(nl.q + 2.0)
    } else {
        0.0
    };
    Ok(kinetic + gradient + displacement)
}

/// Metrics of a difference `v = u_A - u_B`, `∂t v = ∂t u_A - ∂t u_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffMetrics {
    /// `||v||_{H¹}`
    pub h1: f64,
    /// `||∂t v||_{H⁻¹}`
    pub hm1_dt: f64,
    /// `||v||_{L²}`
    pub l2: f64,
    /// `γ/2 ||∇v||² + (∂t v, v) + (2/γ)(||∂t v||²_{H⁻¹} + ||v||²)`
    pub e_minus1: f64,
}

impl DiffMetrics {
    /// `||∂t v||²_{H⁻¹} + ||v||²_{H¹}`.
    pub fn squared_norm(&self) -> f64 {
        self.hm1_dt.powi(2) + self.h1.powi(2)
    }
}

pub fn diff_metrics(a: &State, b: &State, gamma: f64) -> Result<DiffMetrics> {
    const OP: &str = "diff_metrics";
    if !a.u.shares_basis(&b.u) || !a.v.shares_basis(&b.v) || !a.u.shares_basis(&a.v) {
        return Err(Error::BasisMismatch { op: OP });
    }
    let basis = a.basis();
    let v = &a.u - &b.u;
    let dv = &a.v - &b.v;
    let h1 = basis.sobolev_norm(&v, 1.0);
    let hm1_dt = basis.sobolev_norm(&dv, -1.0);
    let l2 = v.l2_norm();
    let e_minus1 =
        gamma / 2.0 * h1 * h1 + basis.inner(&dv, &v)? + 2.0 / gamma * (hm1_dt * hm1_dt + l2 * l2);
    Ok(DiffMetrics {
        h1,
        hm1_dt,
        l2,
        e_minus1,
    })
}

/// Constants `(κ₁, κ₂)` with
/// `κ₁ m <= E₋₁ <= κ₂ m`, `m = ||∂t v||²_{H⁻¹} + ||v||²_{H¹}`.
///
/// Uses `|(∂t v, v)| <= ||∂t v||_{H⁻¹} ||v||_{H¹}` and
/// `||v||² <= ||v||²_{H¹} / λ₁`, so the bounds are the extreme
/// eigenvalues of two 2×2 quadratic forms.
pub fn e_minus1_bounds(gamma: f64, lambda1: f64) -> (f64, f64) {
    fn eig(a: f64, b: f64, c: f64) -> (f64, f64) {
        // [[a, b], [b, c]]
        let tr = a + c;
        let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
        (0.5 * (tr - disc), 0.5 * (tr + disc))
    }
    let (lo, _) = eig(gamma / 2.0, -0.5, 2.0 / gamma);
    let (_, hi) = eig(gamma / 2.0 + 2.0 / (gamma * lambda1), 0.5, 2.0 / gamma);
    (lo, hi)
}

/// Per-interval residual of the energy identity
/// `E(t_{n+1}) - E(t_n) + ∫ dissipation = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceSeries {
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// Residuals between consecutive stored samples. The dissipation integral
/// is the trapezoid sum the integrator accumulates at step resolution.
pub fn balance_residual(trajectory: &Trajectory, eq: &EquationSpec) -> Result<BalanceSeries> {
    let energies = trajectory
        .samples
        .iter()
        .map(|s| energy_report(&s.state, eq, 0.0).map(|e| e.total))
        .collect::<Result<Vec<f64>>>()?;
    let residuals: Vec<f64> = trajectory
        .samples
        .windows(2)
        .zip(energies.windows(2))
        .map(|(s, e)| e[1] - e[0] + (s[1].dissipation - s[0].dissipation))
        .collect();
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(BalanceSeries { residuals, max_abs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, ln y)`; `rate = -slope`. A series with
/// no variation in `ln y` is fitted exactly and reports `r² = 1`.
pub fn fit_decay(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    const OP: &str = "fit_decay";
    if t.len() != y.len() {
        return Err(Error::SizeMismatch {
            op: OP,
            expected: t.len(),
            got: y.len(),
        });
    }
    if t.len() < 10 {
        return Err(Error::invalid(OP, format!("need at least 10 samples, got {}", t.len())));
    }
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveSample { op: OP, index, value });
    }
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = least_squares(t, &logs);
    Ok(DecayFit {
        rate: -line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * n * (1.0 + my * my) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Line {
        slope,
        intercept,
        r_squared,
    }
}
