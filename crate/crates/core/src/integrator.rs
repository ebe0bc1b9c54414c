//! Time integration of the first-order system `u' = v`, `v' = a(u, v)`.
//!
//! Every family splits into a diagonal linear part, `a_k = -d_k v_k - s_k u_k`
//! with per-mode damping `d_k` and stiffness `s_k`, plus nonlinear terms
//! that depend on `u` only. The linear part is always inverted exactly per
//! mode; only the nonlinear terms are iterated (midpoint) or extrapolated
//! (IMEX).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{Basis, Field, Grid, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `u_tt - γΔu_t - Δu + f(u) = ∇·φ'(∇u) + g`
    #[default]
    Main,
    /// `u_tt - γΔu_t - Δu - Φ(||∇u||²)Δu + f(u) = g`, `Φ(s) = s^m`
    Kirchhoff,
    /// `u_tt + Δφ(Δu) + Δ²u + γΔ²u_t + f(u) = g` with hinged ends
    Membrane,
    /// `u_tt - Δu + γ(-Δ)^α u_t + f(u) = g`
    Structural,
}

/// One equation instance on a fixed basis.
#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub family: Family,
    pub gamma: f64,
    /// Damping power, used by the structural family only.
    pub alpha: f64,
    pub nonlinearity: NonlinearitySpec,
    /// Exponent `m` of the Kirchhoff coefficient `Φ(s) = s^m`; the
    /// coefficient is switched off with `phi_kind = zero`.
    pub kirchhoff_m: f64,
    pub forcing: Field,
    pub limit_case_p5: bool,
}

impl EquationSpec {
    pub fn new(family: Family, gamma: f64, nonlinearity: NonlinearitySpec, forcing: Field) -> Self {
        EquationSpec {
            family,
            gamma,
            alpha: 1.0,
            nonlinearity,
            kirchhoff_m: 1.0,
            forcing,
            limit_case_p5: false,
        }
    }

    /// Main family with zero forcing.
    pub fn main(basis: &Arc<Basis>, gamma: f64, nonlinearity: NonlinearitySpec) -> Self {
        Self::new(Family::Main, gamma, nonlinearity, Field::zeros(basis))
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_kirchhoff_m(mut self, m: f64) -> Self {
        self.kirchhoff_m = m;
        self
    }

    pub fn with_forcing(mut self, g: Field) -> Self {
        self.forcing = g;
        self
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.forcing.basis()
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "equation";
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(OP, format!("gamma = {} must be > 0", self.gamma)));
        }
        if self.family == Family::Structural && !(0.5..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(
                OP,
                format!("structural damping needs alpha in [1/2, 1], got {}", self.alpha),
            ));
        }
        if self.family == Family::Kirchhoff && !(self.kirchhoff_m >= 1.0) {
            return Err(Error::invalid(
                OP,
                format!("Kirchhoff exponent m = {} must be >= 1", self.kirchhoff_m),
            ));
        }
        self.nonlinearity.validate(self.limit_case_p5)
    }

    /// True when the nonlinear terms vanish identically.
    pub fn is_linear(&self) -> bool {
        let nl = &self.nonlinearity;
        match self.family {
            Family::Main | Family::Kirchhoff | Family::Membrane => !nl.has_phi() && !nl.has_f(),
            Family::Structural => !nl.has_f(),
        }
    }

    /// Per-mode damping `d_k` and stiffness `s_k` of the linear part.
    pub fn modal_coefficients(&self) -> Vec<(f64, f64)> {
        let g = self.gamma;
        self.basis()
            .eigenvalues()
            .iter()
            .map(|&l| match self.family {
                Family::Main | Family::Kirchhoff => (g * l, l),
                Family::Structural => (g * l.powf(self.alpha), l),
                Family::Membrane => (g * l * l, l * l),
            })
            .collect()
    }

    /// Dissipation rate `sum_k mass d_k v_k^2`, e.g. `γ||∇v||²` for the main family.
    pub fn dissipation_rate(&self, v: &Field) -> f64 {
        let mass = self.basis().mass();
        self.modal_coefficients()
            .iter()
            .zip(v.coeffs())
            .map(|((d, _), c)| d * c * c)
            .sum::<f64>()
            * mass
    }

    /// Nonlinear part of the acceleration (without forcing).
    pub fn nonlinear_terms(&self, u: &Field) -> Result<Field> {
        let basis = self.basis();
        let nl = &self.nonlinearity;
        let mut out = Field::zeros(basis);
        if nl.has_f() {
            let f = pointwise(basis, &basis.to_grid(u), |s| nl.f(s), "rhs_accel: f(u)")?;
            out -= &f;
        }
        if !nl.has_phi() {
            return Ok(out);
        }
        match self.family {
            Family::Main => {
                let d = div_phi_prime(basis, nl, u)?;
                out += &d;
            }
            Family::Kirchhoff => {
                let s = basis.sobolev_norm(u, 1.0).powi(2);
                let coeff = s.powf(self.kirchhoff_m);
                if !coeff.is_finite() {
                    return Err(Error::NonFinite {
                        op: "rhs_accel: Kirchhoff coefficient",
                        index: 0,
                    });
                }
                out.axpy(coeff, &basis.laplacian(u));
            }
            Family::Membrane => {
                let lap = basis.to_grid(&basis.laplacian(u));
                let p = pointwise(basis, &lap, |t| nl.membrane_phi(t), "rhs_accel: φ(Δu)")?;
                // -Δ(φ(Δu))
                out += &basis.laplacian_pow(&p, 1.0);
            }
            Family::Structural => {}
        }
        Ok(out)
    }
}

/// `∇·φ'(∇u)` evaluated pseudo-spectrally.
fn div_phi_prime(basis: &Arc<Basis>, nl: &NonlinearitySpec, u: &Field) -> Result<Field> {
    let mut grads = basis.grad_to_grid(u);
    let n = grads[0].values.len();
    for j in 0..n {
        let mag = grads
            .iter()
            .map(|g| g.values[j] * g.values[j])
            .sum::<f64>()
            .sqrt();
        let c = nl.phi_prime_factor(mag);
        for g in grads.iter_mut() {
            let x = c * g.values[j];
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    op: "rhs_accel: φ'(∇u)",
                    index: j,
                });
            }
            g.values[j] = x;
        }
    }
    basis.div_from_grid(&grads)
}

fn pointwise(
    basis: &Arc<Basis>,
    values: &Grid,
    f: impl Fn(f64) -> f64,
    op: &'static str,
) -> Result<Field> {
    let mut out = Vec::with_capacity(values.values.len());
    for (j, &x) in values.values.iter().enumerate() {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::NonFinite { op, index: j });
        }
        out.push(y);
    }
    basis.to_spectral(&Grid::new(Layout::Interior, out))
}

/// Phase-space point `(u, ∂t u)` at time `t`.
#[derive(Debug, Clone)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn new(u: Field, v: Field, t: f64) -> Result<State> {
        if !u.shares_basis(&v) {
            return Err(Error::BasisMismatch { op: "state" });
        }
        Ok(State { u, v, t })
    }

    pub fn zeros(basis: &Arc<Basis>) -> State {
        State {
            u: Field::zeros(basis),
            v: Field::zeros(basis),
            t: 0.0,
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.u.basis()
    }

    fn check(&self, eq: &EquationSpec, op: &'static str) -> Result<()> {
        if !self.u.shares_basis(&eq.forcing) || !self.v.shares_basis(&eq.forcing) {
            return Err(Error::BasisMismatch { op });
        }
        Ok(())
    }
}

/// `∂t² u` for the state's family.
pub fn rhs_accel(state: &State, eq: &EquationSpec) -> Result<Field> {
    state.check(eq, "rhs_accel")?;
    let mut a = eq.nonlinear_terms(&state.u)?;
    a += &eq.forcing;
    linear_accel_into(&mut a, state, eq);
    Ok(a)
}

fn linear_accel_into(a: &mut Field, state: &State, eq: &EquationSpec) {
    let coeffs = eq.modal_coefficients();
    for (((ak, (d, s)), u), v) in a
        .coeffs_mut()
        .iter_mut()
        .zip(&coeffs)
        .zip(state.u.coeffs())
        .zip(state.v.coeffs())
    {
        *ak -= d * v + s * u;
    }
}

/// Exact solution of `u'' + d u' + s u = 0`, returned as `(u(t), u'(t))`.
pub fn modal_exact(u0: f64, v0: f64, damping: f64, stiffness: f64, t: f64) -> (f64, f64) {
    let a = 0.5 * damping;
    let disc = a * a - stiffness;
    let omega = disc.abs().sqrt();
    if disc > 0.0 && omega * t > 1.0 {
        // distinct real roots; r_minus first to avoid cancellation
        let r_minus = -a - omega;
        let r_plus = stiffness / r_minus;
        let (ep, em) = ((r_plus * t).exp(), (r_minus * t).exp());
        let span = r_plus - r_minus;
        let cp = (v0 - r_minus * u0) / span;
        let cm = (r_plus * u0 - v0) / span;
        return (cp * ep + cm * em, cp * r_plus * ep + cm * r_minus * em);
    }
    // u = e^{-a t} [u0 C(t) + (v0 + a u0) S(t)], C' = σ ω² S, S' = C
    let (c, s, sigma) = if disc >= 0.0 {
        let x = omega * t;
        let s = if omega == 0.0 { t } else { x.sinh() / omega };
        (x.cosh(), s, 1.0)
    } else {
        let x = omega * t;
        (x.cos(), x.sin() / omega, -1.0)
    };
    let e = (-a * t).exp();
    let b = v0 + a * u0;
    let u = e * (u0 * c + b * s);
    let v = -a * u + e * (u0 * sigma * omega * omega * s + b * c);
    (u, v)
}

/// Exact modal solution of `u'' + γλu' + λu = 0`.
pub fn linear_modal_exact(u0: f64, v0: f64, lambda: f64, gamma: f64, t: f64) -> (f64, f64) {
    modal_exact(u0, v0, gamma * lambda, lambda, t)
}

/// Exact solution of the linear part of `eq` from `state` after time `t`.
pub fn linear_exact_state(state: &State, eq: &EquationSpec, t: f64) -> State {
    let basis = state.basis();
    let coeffs = eq.modal_coefficients();
    let mut u = Vec::with_capacity(coeffs.len());
    let mut v = Vec::with_capacity(coeffs.len());
    for ((&(d, s), &u0), &v0) in coeffs.iter().zip(state.u.coeffs()).zip(state.v.coeffs()) {
        let (a, b) = modal_exact(u0, v0, d, s, t);
        u.push(a);
        v.push(b);
    }
    State {
        u: Field::from_coeffs(basis, u).expect("basis length"),
        v: Field::from_coeffs(basis, v).expect("basis length"),
        t: state.t + t,
    }
}

/// Fixed-point controls for the implicit steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

// Solves [[1, -h], [h s, 1 + h d]] (u, v) = (ru, rv) per mode.
fn solve_modal(
    coeffs: &[(f64, f64)],
    h: f64,
    ru: &[f64],
    rv: &[f64],
    u: &mut [f64],
    v: &mut [f64],
) {
    for k in 0..coeffs.len() {
        let (d, s) = coeffs[k];
        let det = 1.0 + h * d + h * h * s;
        u[k] = ((1.0 + h * d) * ru[k] + h * rv[k]) / det;
        v[k] = (-h * s * ru[k] + rv[k]) / det;
    }
}

// Crank-Nicolson explicit half: (u + h v, v + h(-d v - s u))
fn explicit_half(coeffs: &[(f64, f64)], h: f64, state: &State) -> (Vec<f64>, Vec<f64>) {
    let (u, v) = (state.u.coeffs(), state.v.coeffs());
    let ru = u.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let rv = coeffs
        .iter()
        .zip(u)
        .zip(v)
        .map(|((&(d, s), a), b)| b - h * (d * b + s * a))
        .collect();
    (ru, rv)
}

fn l2_diff(a: &[f64], b: &[f64], mass: f64) -> f64 {
    (mass * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
}

/// Result of one implicit-midpoint step, with the converged midpoint state.
#[derive(Debug, Clone)]
pub struct MidpointStep {
    pub next: State,
    pub mid: State,
    pub iterations: usize,
}

/// Implicit midpoint step with the nonlinear midpoint term found by
/// fixed-point iteration; returns the midpoint state as well.
pub fn midpoint_step(
    state: &State,
    eq: &EquationSpec,
    dt: f64,
    opts: SolverOptions,
) -> Result<MidpointStep> {
    const OP: &str = "step_midpoint";
    state.check(eq, OP)?;
    if !(dt > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::invalid(OP, format!("dt = {dt} and tol = {} must be > 0", opts.tol)));
    }
    let basis = state.basis();
    let mass = basis.mass();
    let coeffs = eq.modal_coefficients();
    let h = 0.5 * dt;
    let (ru, rv) = explicit_half(&coeffs, h, state);
    let g = eq.forcing.coeffs();
    let n = basis.len();
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);

    let solve_with = |nonlinear: Option<&Field>, u: &mut [f64], v: &mut [f64]| {
        let rv2: Vec<f64> = match nonlinear {
            Some(nl) => rv
                .iter()
                .zip(nl.coeffs())
                .zip(g)
                .map(|((r, a), gk)| r + dt * (a + gk))
                .collect(),
            None => rv.iter().zip(g).map(|(r, gk)| r + dt * gk).collect(),
        };
        solve_modal(&coeffs, h, &ru, &rv2, u, v);
    };

    let mut iterations = 0;
    if eq.is_linear() {
        solve_with(None, &mut u, &mut v);
    } else {
        // predictor: explicit Euler on u
        let mut u_guess: Vec<f64> = state
            .u
            .coeffs()
            .iter()
            .zip(state.v.coeffs())
            .map(|(a, b)| a + dt * b)
            .collect();
        let mut v_guess = state.v.coeffs().to_vec();
        let mut residual = f64::INFINITY;
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    op: OP,
                    iterations,
                    residual,
                });
            }
            iterations += 1;
            let u_mid = Field::from_coeffs(
                basis,
                state
                    .u
                    .coeffs()
                    .iter()
                    .zip(&u_guess)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
            )?;
            let nl = match eq.nonlinear_terms(&u_mid) {
                // a diverging iteration overflows before it exhausts max_iter
                Err(Error::NonFinite { .. }) if iterations > 1 => {
                    return Err(Error::NonConvergence {
                        op: OP,
                        iterations,
                        residual,
                    })
                }
                r => r?,
            };
            solve_with(Some(&nl), &mut u, &mut v);
            residual = l2_diff(&u, &u_guess, mass).max(l2_diff(&v, &v_guess, mass));
            if !residual.is_finite() {
                return Err(Error::NonConvergence {
                    op: OP,
                    iterations,
                    residual,
                });
            }
            u_guess.copy_from_slice(&u);
            v_guess.copy_from_slice(&v);
            if residual < opts.tol {
                break;
            }
        }
    }
    let next = State {
        u: Field::from_coeffs(basis, u)?,
        v: Field::from_coeffs(basis, v)?,
        t: state.t + dt,
    };
    let mid = State {
        u: state.u.midpoint(&next.u),
        v: state.v.midpoint(&next.v),
        t: state.t + h,
    };
    Ok(MidpointStep {
        next,
        mid,
        iterations,
    })
}

/// Implicit midpoint step (verification integrator).
pub fn step_midpoint(state: &State, eq: &EquationSpec, dt: f64, tol: f64, max_iter: usize) -> Result<State> {
    Ok(midpoint_step(state, eq, dt, SolverOptions { tol, max_iter })?.next)
}

/// Previous nonlinear evaluation carried between IMEX steps.
#[derive(Debug, Clone, Default)]
pub struct ImexHistory {
    previous: Option<Field>,
}

impl ImexHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_started(&self) -> bool {
        self.previous.is_some()
    }
}

/// Crank–Nicolson on the linear part, two-step Adams–Bashforth on the
/// nonlinear terms. An empty history triggers one midpoint startup step.
pub fn step_imex(
    state: &State,
    eq: &EquationSpec,
    dt: f64,
    history: &mut ImexHistory,
    opts: SolverOptions,
) -> Result<State> {
    const OP: &str = "step_imex";
    state.check(eq, OP)?;
    if !(dt > 0.0) {
        return Err(Error::invalid(OP, format!("dt = {dt} must be > 0")));
    }
    let current = eq.nonlinear_terms(&state.u)?;
    let Some(previous) = history.previous.replace(current.clone()) else {
        return Ok(midpoint_step(state, eq, dt, opts)?.next);
    };
    let basis = state.basis();
    let coeffs = eq.modal_coefficients();
    let h = 0.5 * dt;
    let (ru, mut rv) = explicit_half(&coeffs, h, state);
    for (((r, a), b), gk) in rv
        .iter_mut()
        .zip(current.coeffs())
        .zip(previous.coeffs())
        .zip(eq.forcing.coeffs())
    {
        *r += dt * (1.5 * a - 0.5 * b + gk);
    }
    let n = basis.len();
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
    solve_modal(&coeffs, h, &ru, &rv, &mut u, &mut v);
    Ok(State {
        u: Field::from_coeffs(basis, u)?,
        v: Field::from_coeffs(basis, v)?,
        t: state.t + dt,
    })
}

/// Classical explicit RK4 on the full system. Stable only for
/// `dt * max_k d_k` of order one; used as a reference on small bases.
pub fn step_rk4(state: &State, eq: &EquationSpec, dt: f64) -> Result<State> {
    state.check(eq, "step_rk4")?;
    let stage = |s: &State| -> Result<(Field, Field)> { Ok((s.v.clone(), rhs_accel(s, eq)?)) };
    let shifted = |k: &(Field, Field), c: f64| {
        let mut u = state.u.clone();
        u.axpy(c, &k.0);
        let mut v = state.v.clone();
        v.axpy(c, &k.1);
        State { u, v, t: state.t }
    };
    let k1 = stage(state)?;
    let k2 = stage(&shifted(&k1, 0.5 * dt))?;
    let k3 = stage(&shifted(&k2, 0.5 * dt))?;
    let k4 = stage(&shifted(&k3, dt))?;
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    for (w, k) in [(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)] {
        u.axpy(w * dt / 6.0, &k.0);
        v.axpy(w * dt / 6.0, &k.1);
    }
    Ok(State {
        u,
        v,
        t: state.t + dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Midpoint,
    Imex,
    Rk4Oracle,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Midpoint => "midpoint",
            Scheme::Imex => "imex",
            Scheme::Rk4Oracle => "rk4_oracle",
        }
    }
}

/// Stateful single-scheme stepper.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    eq: &'a EquationSpec,
    dt: f64,
    scheme: Scheme,
    opts: SolverOptions,
    history: ImexHistory,
}

impl<'a> Stepper<'a> {
    pub fn new(eq: &'a EquationSpec, dt: f64, scheme: Scheme, opts: SolverOptions) -> Result<Self> {
        eq.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("integrate", format!("dt = {dt} must be > 0")));
        }
        Ok(Stepper {
            eq,
            dt,
            scheme,
            opts,
            history: ImexHistory::new(),
        })
    }

    pub fn step(&mut self, state: &State) -> Result<State> {
        let r = match self.scheme {
            Scheme::Midpoint => midpoint_step(state, self.eq, self.dt, self.opts).map(|s| s.next),
            Scheme::Imex => step_imex(state, self.eq, self.dt, &mut self.history, self.opts),
            Scheme::Rk4Oracle => step_rk4(state, self.eq, self.dt),
        };
        r.map_err(|e| Error::AtTime {
            t: state.t,
            source: Box::new(e),
        })
    }
}

/// A stored sample with the running dissipation integral
/// `∫_0^t sum_k mass d_k v_k^2 ds` accumulated by the trapezoid rule over
/// every step (not only over stored samples).
#[derive(Debug, Clone)]
pub struct Sample {
    pub state: State,
    pub step: usize,
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub cadence: usize,
    pub scheme: Scheme,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn last(&self) -> &State {
        &self.samples.last().expect("trajectory holds the initial sample").state
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`; `t_end` must be a
/// multiple of `dt` up to rounding.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    const OP: &str = "integrate";
    if !(t_end >= 0.0) {
        return Err(Error::invalid(OP, format!("T = {t_end} must be >= 0")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::invalid(OP, format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Integrates from `initial` to `t_end`, storing every `cadence`-th step.
/// Deterministic for fixed inputs.
pub fn integrate(
    initial: &State,
    eq: &EquationSpec,
    dt: f64,
    t_end: f64,
    cadence: usize,
    scheme: Scheme,
    opts: SolverOptions,
) -> Result<Trajectory> {
    integrate_with(initial, eq, dt, t_end, cadence, scheme, opts, |_, _| {})
}

/// [`integrate`] with a hook called after every step with the previous and
/// the new state.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with(
    initial: &State,
    eq: &EquationSpec,
    dt: f64,
    t_end: f64,
    cadence: usize,
    scheme: Scheme,
    opts: SolverOptions,
    mut hook: impl FnMut(&State, &State),
) -> Result<Trajectory> {
    const OP: &str = "integrate";
    initial.check(eq, OP)?;
    let mut stepper = Stepper::new(eq, dt, scheme, opts)?;
    let steps = step_count(dt, t_end)?;
    if cadence == 0 || steps % cadence != 0 {
        return Err(Error::invalid(
            OP,
            format!("cadence {cadence} must divide the step count {steps}"),
        ));
    }
    let mut samples = vec![Sample {
        state: initial.clone(),
        step: 0,
        dissipation: 0.0,
    }];
    let mut state = initial.clone();
    let mut rate = eq.dissipation_rate(&state.v);
    let mut dissipation = 0.0;
    for n in 1..=steps {
        let mut next = stepper.step(&state)?;
        // pin the clock to n dt so sample times do not drift
        next.t = initial.t + n as f64 * dt;
        let next_rate = eq.dissipation_rate(&next.v);
        dissipation += 0.5 * dt * (rate + next_rate);
        rate = next_rate;
        hook(&state, &next);
        state = next;
        if n % cadence == 0 {
            samples.push(Sample {
                state: state.clone(),
                step: n,
                dissipation,
            });
        }
    }
    Ok(Trajectory {
        dt,
        cadence,
        scheme,
        samples,
    })
}

/// Which pseudoparabolic equation a step advances.
enum Pseudoparabolic<'a> {
    /// `w` equation, forced by `h`.
    Forced(&'a Field),
    /// remainder equation around the background `w` at the two step ends
    Remainder(&'a Field, &'a Field),
}

/// One implicit-midpoint step of
/// `-γ∂tΔw - Δw + L w + f(w) - ∇·φ'(∇w) = h`, i.e. per mode
/// `γλ_k ∂t w_k = -(λ_k + L) w_k - [f(w) - ∇·φ'(∇w)]_k + h_k`.
/// `h` is the forcing at the step midpoint.
pub fn step_pseudoparabolic(
    w: &Field,
    dt: f64,
    shift: f64,
    h: &Field,
    eq: &EquationSpec,
    opts: SolverOptions,
) -> Result<Field> {
    pseudoparabolic_step(w, dt, shift, Pseudoparabolic::Forced(h), eq, opts)
}

/// One step of the remainder equation
/// `-γ∂tΔv - Δv + L v + [f(v + w) - f(w)] = ∇·(φ'(∇v + ∇w) - φ'(∇w))`
/// given the background `w` at the start and end of the step.
pub fn step_splitting_remainder(
    v: &Field,
    dt: f64,
    shift: f64,
    w_start: &Field,
    w_end: &Field,
    eq: &EquationSpec,
    opts: SolverOptions,
) -> Result<Field> {
    pseudoparabolic_step(v, dt, shift, Pseudoparabolic::Remainder(w_start, w_end), eq, opts)
}

fn pseudoparabolic_step(
    y: &Field,
    dt: f64,
    shift: f64,
    kind: Pseudoparabolic<'_>,
    eq: &EquationSpec,
    opts: SolverOptions,
) -> Result<Field> {
    const OP: &str = "step_pseudoparabolic";
    if eq.family != Family::Main {
        return Err(Error::invalid(OP, "splitting is defined for the main family only"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(OP, format!("dt = {dt} must be > 0")));
    }
    let basis = y.basis();
    let mass = basis.mass();
    let gamma = eq.gamma;
    let lambdas = basis.eigenvalues();
    // f(w) - ∇·φ'(∇w) is minus the main-family nonlinear term
    let operator = |x: &Field| -> Result<Field> { Ok(-&eq.nonlinear_terms(x)?) };
    let (forcing, background_mid, background_op) = match kind {
        Pseudoparabolic::Forced(h) => (Some(h), None, None),
        Pseudoparabolic::Remainder(w0, w1) => {
            let wm = w0.midpoint(w1);
            let op = if eq.is_linear() { None } else { Some(operator(&wm)?) };
            (None, Some(wm), op)
        }
    };
    let solve = |nl: Option<&Field>| -> Vec<f64> {
        (0..lambdas.len())
            .map(|k| {
                let l = lambdas[k];
                let a = gamma * l / dt;
                let b = 0.5 * (l + shift);
                let mut r = (a - b) * y.coeffs()[k];
                if let Some(h) = forcing {
                    r += h.coeffs()[k];
                }
                if let Some(n) = nl {
                    r -= n.coeffs()[k];
                }
                r / (a + b)
            })
            .collect()
    };
    if eq.is_linear() {
        return Field::from_coeffs(basis, solve(None));
    }
    let mut guess = y.coeffs().to_vec();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                op: OP,
                iterations,
                residual,
            });
        }
        iterations += 1;
        let mid = Field::from_coeffs(
            basis,
            y.coeffs().iter().zip(&guess).map(|(a, b)| 0.5 * (a + b)).collect(),
        )?;
        let nl = match (&background_mid, &background_op) {
            (Some(wm), Some(base)) => &operator(&(&mid + wm))? - base,
            _ => operator(&mid)?,
        };
        let next = solve(Some(&nl));
        residual = l2_diff(&next, &guess, mass);
        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                op: OP,
                iterations,
                residual,
            });
        }
        guess = next;
        if residual < opts.tol {
            break;
        }
    }
    Field::from_coeffs(basis, guess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Kind;
    use std::f64::consts::PI;

    fn basis(n: usize) -> Arc<Basis> {
        Basis::new(1, n, &[PI], 2 * n).unwrap()
    }

    #[test]
    fn zero_state_has_zero_acceleration() {
        let b = basis(8);
        for family in [Family::Main, Family::Kirchhoff, Family::Membrane, Family::Structural] {
            let eq = EquationSpec::new(family, 1.0, NonlinearitySpec::power(3.0, 2.0, 0.0), Field::zeros(&b));
            let a = rhs_accel(&State::zeros(&b), &eq).unwrap();
            assert!(a.is_zero(), "{family:?}");
        }
    }

    #[test]
    fn modal_decoupling_in_rhs() {
        let b = basis(8);
        let gamma = 0.7;
        let mut u = Field::zeros(&b);
        u.coeffs_mut()[2] = 0.4;
        let mut v = Field::zeros(&b);
        v.coeffs_mut()[2] = -1.3;
        let s = State::new(u, v, 0.0).unwrap();
        let l = b.eigenvalues()[2];
        let eq = EquationSpec::main(&b, gamma, NonlinearitySpec::linear());
        let a = rhs_accel(&s, &eq).unwrap();
        assert!((a.coeffs()[2] + l * (gamma * -1.3 + 0.4)).abs() < 1e-12);

        let mut quad = NonlinearitySpec::power(1.0, 2.0, 0.0);
        quad.f_kind = Kind::Zero;
        let eq = EquationSpec::main(&b, gamma, quad);
        let a = rhs_accel(&s, &eq).unwrap();
        let expected = -l * (gamma * -1.3 + 0.4) - 2.0 * l * 0.4;
        assert!((a.coeffs()[2] - expected).abs() < 1e-11);
    }

    #[test]
    fn overflow_is_reported_with_index() {
        let b = basis(4);
        let eq = EquationSpec::main(&b, 1.0, NonlinearitySpec::power(3.0, 4.0, 0.0));
        let u = Field::mode(&b, &[1], 1e80).unwrap();
        let s = State::new(u, Field::zeros(&b), 0.0).unwrap();
        let err = rhs_accel(&s, &eq).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn repeated_root_closed_form() {
        let (u0, v0) = (0.8, -0.3);
        for t in [0.0, 0.5, 1.0, 3.0] {
            let (u, v) = linear_modal_exact(u0, v0, 1.0, 2.0, t);
            let eu = (u0 + (u0 + v0) * t) * (-t).exp();
            let ev = ((u0 + v0) - (u0 + (u0 + v0) * t)) * (-t).exp();
            assert!((u - eu).abs() < 1e-14 && (v - ev).abs() < 1e-14);
        }
        assert_eq!(linear_modal_exact(0.0, 0.0, 3.0, 0.5, 2.0), (0.0, 0.0));
    }

    #[test]
    fn strongly_overdamped_slow_root() {
        // slow root ≈ -1/γ at γ = 100, λ = 1
        let (u, _) = linear_modal_exact(1.0, 0.0, 1.0, 100.0, 10.0);
        let approx = (-10.0f64 / 100.0).exp();
        assert!((u / approx - 1.0).abs() < 0.01);
    }

    #[test]
    fn modal_exact_satisfies_ode() {
        // central differences against the ODE for all three regimes
        for (d, s) in [(0.5, 1.0), (2.0, 1.0), (2.0, 1.0 + 1e-9), (40.0, 3.0)] {
            let h = 1e-4;
            for t in [0.3, 1.7] {
                let (um, _) = modal_exact(0.4, 1.1, d, s, t - h);
                let (u0, v0) = modal_exact(0.4, 1.1, d, s, t);
                let (up, _) = modal_exact(0.4, 1.1, d, s, t + h);
                let upp = (up - 2.0 * u0 + um) / (h * h);
                let up1 = (up - um) / (2.0 * h);
                assert!((upp + d * v0 + s * u0).abs() < 1e-5, "d={d} s={s}");
                assert!((up1 - v0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn midpoint_zero_state_stays_zero() {
        let b = basis(8);
        let eq = EquationSpec::main(&b, 1.0, NonlinearitySpec::power(3.0, 2.0, 0.0));
        let s = step_midpoint(&State::zeros(&b), &eq, 1e-2, 1e-12, 50).unwrap();
        assert!(s.u.is_zero() && s.v.is_zero());
        let mut hist = ImexHistory::new();
        let opts = SolverOptions::default();
        let s1 = step_imex(&State::zeros(&b), &eq, 1e-2, &mut hist, opts).unwrap();
        let s2 = step_imex(&s1, &eq, 1e-2, &mut hist, opts).unwrap();
        assert!(s2.u.is_zero() && s2.v.is_zero());
    }

    #[test]
    fn midpoint_reports_nonconvergence() {
        let b = basis(16);
        let eq = EquationSpec::main(&b, 1.0, NonlinearitySpec::power(3.0, 2.0, 0.0));
        let u = Field::mode(&b, &[3], 30.0).unwrap();
        let s = State::new(u, Field::zeros(&b), 0.0).unwrap();
        let err = step_midpoint(&s, &eq, 0.5, 1e-12, 5).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err}");
    }

    #[test]
    fn pseudoparabolic_linear_decay_and_zero() {
        let b = basis(8);
        let gamma = 2.0;
        let eq = EquationSpec::main(&b, gamma, NonlinearitySpec::linear());
        let h = Field::zeros(&b);
        let mut w = Field::from_coeffs(&b, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2]).unwrap();
        let w0 = w.clone();
        let dt = 1e-3;
        for _ in 0..1000 {
            w = step_pseudoparabolic(&w, dt, 0.0, &h, &eq, SolverOptions::default()).unwrap();
        }
        let decay = (-1.0 / gamma).exp();
        for (a, b0) in w.coeffs().iter().zip(w0.coeffs()) {
            assert!((a - b0 * decay).abs() < 1e-7);
        }
        let eq = EquationSpec::main(&b, gamma, NonlinearitySpec::power(3.0, 2.0, 0.0));
        let z = step_pseudoparabolic(&Field::zeros(&b), dt, 1.0, &h, &eq, SolverOptions::default()).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn integrate_validates_cadence_and_t0() {
        let b = basis(4);
        let eq = EquationSpec::main(&b, 1.0, NonlinearitySpec::linear());
        let init = State::zeros(&b);
        let tr = integrate(&init, &eq, 0.1, 0.0, 1, Scheme::Midpoint, SolverOptions::default()).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert!(integrate(&init, &eq, 0.1, 1.0, 3, Scheme::Midpoint, SolverOptions::default()).is_err());
        assert!(integrate(&init, &eq, 0.3, 1.0, 1, Scheme::Midpoint, SolverOptions::default()).is_err());
    }

    #[test]
    fn structural_alpha_rejected_outside_range() {
        let b = basis(4);
        let eq = EquationSpec::new(Family::Structural, 1.0, NonlinearitySpec::linear(), Field::zeros(&b))
            .with_alpha(0.4);
        assert!(eq.validate().is_err());
        let eq = EquationSpec::main(&b, 0.0, NonlinearitySpec::linear());
        assert!(eq.validate().is_err());
    }
}
