use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{EquationSpec, Family, Scheme, SolverOptions, State};
use crate::nonlinearity::{Kind, NonlinearitySpec};
use crate::spectral::{min_grid_points, Basis, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dissipativity,
    Lipschitz,
    Smoothing,
    Splitting,
    StrongNorm,
    Convergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dissipativity => "dissipativity",
            ExperimentKind::Lipschitz => "lipschitz",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::Splitting => "splitting",
            ExperimentKind::StrongNorm => "strong_norm",
            ExperimentKind::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    #[serde(default)]
    pub family: Family,
    pub gamma: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "three")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(rename = "C_f", default)]
    pub c_f: f64,
    #[serde(default = "one")]
    pub kirchhoff_m: f64,
    #[serde(default)]
    pub phi_kind: Kind,
    #[serde(default)]
    pub f_kind: Kind,
    #[serde(default)]
    pub limit_case_p5: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    #[default]
    Zero,
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    #[serde(default)]
    pub kind: ForcingKind,
    /// Mode multi-index, one entry per dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Collocation points per axis; defaults to `ceil(3N/2)`.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Side lengths; defaults to `π` on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "one_usize")]
    pub cadence: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Smooth,
    RandomSpectral,
    RoughVelocity,
}

/// Initial data. `amplitudes` and `velocity_amplitudes` are coefficients
/// of the first modes in flat order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_amplitudes: Option<Vec<f64>>,
    /// `random_spectral`: coefficient decay `(λ_k/λ₁)^{-σ/2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// `random_spectral`: overall scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// `rough_velocity`: coefficient decay `(λ_k/λ₁)^{-exponent/2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// `rough_velocity`: target `||∂t u(0)||_{L²}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_norm: Option<f64>,
    /// `rough_velocity`: number of leading modes the normalization is
    /// computed over; defaults to all modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativityConfig {
    /// Each run starts from the initial data scaled by one magnitude.
    #[serde(default = "unit_list")]
    pub magnitudes: Vec<f64>,
    /// Allowed `||dE||` increase per sample, relative to `max(1, E(0))`.
    #[serde(default = "energy_slack")]
    pub energy_slack: f64,
    /// Relative spread of the terminal `||ξ_u||_E` values.
    #[serde(default = "band_tolerance")]
    pub band_tolerance: f64,
    /// Level used to report the time each run decays below.
    #[serde(default = "decay_level")]
    pub decay_level: f64,
    /// Relative tolerance of the linear decay-rate check.
    #[serde(default = "rate_tolerance")]
    pub rate_tolerance: f64,
}

impl Default for DissipativityConfig {
    fn default() -> Self {
        DissipativityConfig {
            magnitudes: unit_list(),
            energy_slack: energy_slack(),
            band_tolerance: band_tolerance(),
            decay_level: decay_level(),
            rate_tolerance: rate_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzConfig {
    #[serde(default = "epsilons")]
    pub epsilons: Vec<f64>,
    /// Perturbation direction, a mode multi-index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<usize>>,
    /// Allowed `max/min` of the amplification across `ε`.
    #[serde(default = "two")]
    pub spread_factor: f64,
    /// Also run the equation with `φ = f = 0`.
    #[serde(default)]
    pub linear_control: bool,
    /// Allowed `max/min - 1` for the linear control.
    #[serde(default = "linear_spread")]
    pub linear_spread: f64,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig {
            epsilons: epsilons(),
            direction: None,
            spread_factor: two(),
            linear_control: false,
            linear_spread: linear_spread(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    #[serde(default = "probe_times")]
    pub probe_times: Vec<f64>,
    /// Also run at `2N` modes with nested data.
    #[serde(default = "yes")]
    pub refine: bool,
    /// Allowed relative change of each probe under refinement.
    #[serde(default = "stability_tolerance")]
    pub stability_tolerance: f64,
    /// Required relative growth of `||∂t u(0)||_{H¹}` under refinement.
    #[serde(default = "initial_growth")]
    pub initial_growth: f64,
    /// Probes at or below this time enter the blow-up fit.
    #[serde(default = "blowup_window")]
    pub blowup_window: f64,
    /// Relative tolerance against the modal closed form (linear runs).
    #[serde(default = "oracle_tolerance")]
    pub oracle_tolerance: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            probe_times: probe_times(),
            refine: true,
            stability_tolerance: stability_tolerance(),
            initial_growth: initial_growth(),
            blowup_window: blowup_window(),
            oracle_tolerance: oracle_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingConfig {
    /// Shift `L`; defaults to `Ĉ + 1` with `Ĉ` the sampled `f'` bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default = "consistency_tol")]
    pub consistency_tol: f64,
    #[serde(default = "r_squared_min")]
    pub r_squared_min: f64,
    /// Also run the linear single-mode control against its closed-form rate.
    #[serde(default)]
    pub linear_control: bool,
    #[serde(default = "rate_tolerance")]
    pub rate_tolerance: f64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig {
            shift: None,
            consistency_tol: consistency_tol(),
            r_squared_min: r_squared_min(),
            linear_control: false,
            rate_tolerance: rate_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StrongNormConfig {
    /// Record `∫||∇u||⁶_{L¹⁸}` over unit windows.
    #[serde(default)]
    pub limit_diagnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Time steps; defaults to `dt, dt/2, dt/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dts: Option<Vec<f64>>,
    /// Mode counts for the spatial study, run at the base `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
    /// Mode count of the spatial reference; defaults to twice the largest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_modes: Option<usize>,
}

/// A full run description, parsed from TOML with unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub equation: EquationConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipativity: Option<DissipativityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_norm: Option<StrongNormConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn unit_list() -> Vec<f64> {
    vec![1.0]
}
fn energy_slack() -> f64 {
    1e-10
}
fn band_tolerance() -> f64 {
    0.1
}
fn decay_level() -> f64 {
    1e-4
}
fn rate_tolerance() -> f64 {
    0.05
}
fn epsilons() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn linear_spread() -> f64 {
    1e-8
}
fn probe_times() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.5, 1.0]
}
fn stability_tolerance() -> f64 {
    0.02
}
fn initial_growth() -> f64 {
    0.4
}
fn blowup_window() -> f64 {
    0.1
}
fn oracle_tolerance() -> f64 {
    1e-6
}
fn consistency_tol() -> f64 {
    1e-6
}
fn r_squared_min() -> f64 {
    0.98
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every physical and numerical parameter, building the basis
    /// and equation once so their preconditions are enforced up front.
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return cfg(format!("time.dt = {} must be > 0", self.time.dt));
        }
        if self.time.cadence == 0 {
            return cfg("time.cadence must be >= 1".into());
        }
        let steps = crate::integrator::step_count(self.time.dt, self.time.t_end)?;
        if steps % self.time.cadence != 0 {
            return cfg(format!(
                "time.cadence = {} must divide the step count {steps}",
                self.time.cadence
            ));
        }
        let eq = self.equation_on(&self.basis()?)?;
        eq.validate()?;
        if matches!(self.initial.preset, Preset::RandomSpectral | Preset::RoughVelocity)
            && self.initial.seed.is_none()
        {
            return cfg(format!(
                "initial.seed is required for the {:?} preset",
                self.initial.preset
            ));
        }
        if self.experiment == ExperimentKind::Splitting && self.equation.family != Family::Main {
            return cfg("splitting runs require equation.family = \"main\"".into());
        }
        if self.experiment == ExperimentKind::Splitting && self.time.scheme != Scheme::Midpoint {
            return cfg("splitting runs require time.scheme = \"midpoint\"".into());
        }
        if let Some(s) = &self.solver {
            if !(s.tol > 0.0) || s.max_iter == 0 {
                return cfg("solver.tol must be > 0 and solver.max_iter >= 1".into());
            }
        }
        if let Some(d) = &self.dissipativity {
            if d.magnitudes.is_empty() || d.magnitudes.iter().any(|m| !(*m > 0.0)) {
                return cfg("dissipativity.magnitudes must be a non-empty list of positive values".into());
            }
        }
        if let Some(l) = &self.lipschitz {
            if l.epsilons.is_empty() || l.epsilons.iter().any(|e| !(*e >= 0.0)) {
                return cfg("lipschitz.epsilons must be a non-empty list of values >= 0".into());
            }
        }
        if let Some(s) = &self.smoothing {
            if s.probe_times.iter().any(|t| !(*t > 0.0 && *t <= self.time.t_end)) {
                return cfg("smoothing.probe_times must lie in (0, T]".into());
            }
            for &t in &s.probe_times {
                crate::integrator::step_count(self.time.dt, t)?;
            }
        }
        if let Some(c) = &self.convergence {
            if let Some(dts) = &c.dts {
                if dts.len() < 2 || dts.iter().any(|d| !(*d > 0.0)) {
                    return cfg("convergence.dts needs at least two positive steps".into());
                }
            }
            if let Some(m) = &c.modes {
                if m.len() < 2 || m.contains(&0) {
                    return cfg("convergence.modes needs at least two positive counts".into());
                }
            }
        }
        self.initial_state(&self.basis()?)?;
        Ok(())
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.grid
            .lengths
            .clone()
            .unwrap_or_else(|| vec![PI; self.grid.dim])
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.unwrap_or_default()
    }

    pub fn basis(&self) -> Result<Arc<Basis>> {
        self.basis_with_modes(self.grid.n)
    }

    /// Basis with `modes` per axis; the grid scales with the configured
    /// ratio `M/N`.
    pub fn basis_with_modes(&self, modes: usize) -> Result<Arc<Basis>> {
        let points = match self.grid.m {
            Some(m) if modes == self.grid.n => m,
            Some(m) => (m * modes).div_ceil(self.grid.n).max(min_grid_points(modes)),
            None => min_grid_points(modes),
        };
        Basis::new(self.grid.dim, modes, &self.lengths(), points)
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        NonlinearitySpec {
            p: self.equation.p,
            q: self.equation.q,
            c_f: self.equation.c_f,
            phi_kind: self.equation.phi_kind,
            f_kind: self.equation.f_kind,
        }
    }

    pub fn equation_on(&self, basis: &Arc<Basis>) -> Result<EquationSpec> {
        let e = &self.equation;
        let mut eq = EquationSpec::new(e.family, e.gamma, self.nonlinearity(), self.forcing_on(basis)?)
            .with_alpha(e.alpha)
            .with_kirchhoff_m(e.kirchhoff_m);
        eq.limit_case_p5 = e.limit_case_p5;
        Ok(eq)
    }

    pub fn forcing_on(&self, basis: &Arc<Basis>) -> Result<Field> {
        match self.forcing.kind {
            ForcingKind::Zero => Ok(Field::zeros(basis)),
            ForcingKind::Mode => {
                let k = self.forcing.k.clone().unwrap_or_else(|| vec![1; basis.dim()]);
                let a = self
                    .forcing
                    .amplitude
                    .ok_or_else(|| Error::Config("forcing.amplitude is required for kind = \"mode\"".into()))?;
                Field::mode(basis, &k, a)
            }
        }
    }

    /// Initial state on `basis`. Random coefficients are drawn in flat mode
    /// order, so in one dimension the data on `2N` modes extends the data
    /// on `N` modes.
    pub fn initial_state(&self, basis: &Arc<Basis>) -> Result<State> {
        let init = &self.initial;
        let n = basis.len();
        let leading = |amps: &Option<Vec<f64>>, default: &[f64]| -> Vec<f64> {
            let amps = amps.as_deref().unwrap_or(default);
            let mut c = vec![0.0; n];
            for (slot, a) in c.iter_mut().zip(amps) {
                *slot = *a;
            }
            c
        };
        let lambdas = basis.eigenvalues();
        let l1 = basis.first_eigenvalue();
        let gaussian = |seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let (u, v) = match init.preset {
            Preset::Smooth => (
                leading(&init.amplitudes, &[1.0]),
                leading(&init.velocity_amplitudes, &[]),
            ),
            Preset::RandomSpectral => {
                let seed = self.required_seed()?;
                let sigma = init.sigma.unwrap_or(2.0);
                let scale = init.scale.unwrap_or(1.0);
                let xi = gaussian(seed);
                let u = xi
                    .iter()
                    .zip(lambdas)
                    .map(|(x, l)| scale * x * (l / l1).powf(-sigma / 2.0))
                    .collect();
                (u, leading(&init.velocity_amplitudes, &[]))
            }
            Preset::RoughVelocity => {
                let seed = self.required_seed()?;
                let exponent = init.exponent.unwrap_or(0.51);
                let target = init.l2_norm.unwrap_or(1.0);
                let xi = gaussian(seed);
                let mut v: Vec<f64> = xi
                    .iter()
                    .zip(lambdas)
                    .map(|(x, l)| x * (l / l1).powf(-exponent / 2.0))
                    .collect();
                let count = init.normalization_modes.unwrap_or(n).min(n);
                let norm = (basis.mass() * v[..count].iter().map(|c| c * c).sum::<f64>()).sqrt();
                if !(norm > 0.0) {
                    return Err(Error::Config("rough_velocity data has zero norm".into()));
                }
                v.iter_mut().for_each(|c| *c *= target / norm);
                (leading(&init.amplitudes, &[1.0]), v)
            }
        };
        State::new(Field::from_coeffs(basis, u)?, Field::from_coeffs(basis, v)?, 0.0)
    }

    fn required_seed(&self) -> Result<u64> {
        self.initial
            .seed
            .ok_or_else(|| Error::Config("initial.seed is required for random presets".into()))
    }
}
