//! Power-law nonlinearities
//!
//! `f(s) = s|s|^q - C_f s` and `phi(eta) = |eta|^(p+1)`, their primitives and
//! derivatives, the monotonicity gap of `phi'` and an empirical estimator of
//! the structural constants they satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    Power,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    /// Exponent of the gradient nonlinearity, `p >= 1`.
    pub p: f64,
    /// Exponent of the displacement nonlinearity, `q > 0`.
    pub q: f64,
    /// Linear destabilization in `f`, `C_f >= 0`.
    pub c_f: f64,
    pub phi_kind: Kind,
    pub f_kind: Kind,
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        NonlinearitySpec {
            p: 3.0,
            q: 2.0,
            c_f: 0.0,
            phi_kind: Kind::Power,
            f_kind: Kind::Power,
        }
    }
}

impl NonlinearitySpec {
    pub fn power(p: f64, q: f64, c_f: f64) -> Self {
        NonlinearitySpec {
            p,
            q,
            c_f,
            ..Default::default()
        }
    }

    /// Both nonlinearities switched off.
    pub fn linear() -> Self {
        NonlinearitySpec {
            phi_kind: Kind::Zero,
            f_kind: Kind::Zero,
            ..Default::default()
        }
    }

    /// Checks exponent ranges. `p = 5` requires `limit_case`.
    pub fn validate(&self, limit_case: bool) -> Result<()> {
        const OP: &str = "nonlinearity";
        if !(self.p >= 1.0) {
            return Err(Error::invalid(OP, format!("p = {} must be >= 1", self.p)));
        }
        if self.p > 5.0 || (self.p == 5.0 && !limit_case) {
            return Err(Error::invalid(
                OP,
                format!("p = {} outside [1, 5); p = 5 needs the limit-case flag", self.p),
            ));
        }
        if !(self.q > 0.0) {
            return Err(Error::invalid(OP, format!("q = {} must be > 0", self.q)));
        }
        if !(self.c_f >= 0.0) {
            return Err(Error::invalid(OP, format!("C_f = {} must be >= 0", self.c_f)));
        }
        Ok(())
    }

    pub fn has_phi(&self) -> bool {
        self.phi_kind == Kind::Power
    }

    pub fn has_f(&self) -> bool {
        self.f_kind == Kind::Power
    }

    pub fn f(&self, s: f64) -> f64 {
        match self.f_kind {
            Kind::Zero => 0.0,
            Kind::Power => s * s.abs().powf(self.q) - self.c_f * s,
        }
    }

    /// Primitive of `f` vanishing at 0.
    pub fn big_f(&self, s: f64) -> f64 {
        match self.f_kind {
            Kind::Zero => 0.0,
            Kind::Power => {
                s.abs().powf(self.q + 2.0) / (self.q + 2.0) - 0.5 * self.c_f * s * s
            }
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        match self.f_kind {
            Kind::Zero => 0.0,
            Kind::Power => (self.q + 1.0) * s.abs().powf(self.q) - self.c_f,
        }
    }

    pub fn phi(&self, eta: f64) -> f64 {
        match self.phi_kind {
            Kind::Zero => 0.0,
            Kind::Power => eta.abs().powf(self.p + 1.0),
        }
    }

    pub fn phi_prime(&self, eta: f64) -> f64 {
        self.phi_prime_factor(eta.abs()) * eta
    }

    pub fn phi_second(&self, eta: f64) -> f64 {
        match self.phi_kind {
            Kind::Zero => 0.0,
            Kind::Power => self.p * (self.p + 1.0) * eta.abs().powf(self.p - 1.0),
        }
    }

    /// `(p + 1)|eta|^(p - 1)`, so that `phi'(eta) = factor * eta` in any
    /// dimension. At the origin this is 0 for `p > 1` and 2 for `p = 1`.
    pub fn phi_prime_factor(&self, magnitude: f64) -> f64 {
        match self.phi_kind {
            Kind::Zero => 0.0,
            Kind::Power => {
                if self.p == 1.0 {
                    2.0
                } else {
                    (self.p + 1.0) * magnitude.powf(self.p - 1.0)
                }
            }
        }
    }

    /// `phi` of a vector argument (radial form).
    pub fn phi_vec(&self, eta: &[f64]) -> f64 {
        self.phi(norm(eta))
    }

    /// Gradient of `phi` at a vector argument.
    pub fn phi_prime_vec(&self, eta: &[f64]) -> Vec<f64> {
        let c = self.phi_prime_factor(norm(eta));
        eta.iter().map(|e| c * e).collect()
    }

    /// Pointwise nonlinearity of the hinged-membrane variant,
    /// `theta |theta|^(p-1) = phi'(theta) / (p + 1)`.
    pub fn membrane_phi(&self, theta: f64) -> f64 {
        match self.phi_kind {
            Kind::Zero => 0.0,
            Kind::Power => theta * theta.abs().powf(self.p - 1.0),
        }
    }

    /// Primitive of [`membrane_phi`](Self::membrane_phi), `|theta|^(p+1) / (p + 1)`.
    pub fn membrane_big_phi(&self, theta: f64) -> f64 {
        match self.phi_kind {
            Kind::Zero => 0.0,
            Kind::Power => theta.abs().powf(self.p + 1.0) / (self.p + 1.0),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `[phi'(eta1) - phi'(eta2)](eta1 - eta2) / ((|eta1| + |eta2|)^(p-1) |eta1 - eta2|^2)`.
pub fn monotonicity_gap(eta1: f64, eta2: f64, spec: &NonlinearitySpec) -> Result<f64> {
    monotonicity_gap_vec(&[eta1], &[eta2], spec)
}

/// Vector form of [`monotonicity_gap`].
pub fn monotonicity_gap_vec(eta1: &[f64], eta2: &[f64], spec: &NonlinearitySpec) -> Result<f64> {
    const OP: &str = "monotonicity_gap";
    if eta1.len() != eta2.len() {
        return Err(Error::SizeMismatch {
            op: OP,
            expected: eta1.len(),
            got: eta2.len(),
        });
    }
    let diff: Vec<f64> = eta1.iter().zip(eta2).map(|(a, b)| a - b).collect();
    let d2: f64 = diff.iter().map(|d| d * d).sum();
    if d2 == 0.0 {
        return Err(Error::invalid(OP, "coincident arguments"));
    }
    let (g1, g2) = (spec.phi_prime_vec(eta1), spec.phi_prime_vec(eta2));
    let num: f64 = g1
        .iter()
        .zip(&g2)
        .zip(&diff)
        .map(|((a, b), d)| (a - b) * d)
        .sum();
    let weight = (norm(eta1) + norm(eta2)).powf(spec.p - 1.0);
    Ok(num / (weight * d2))
}

/// Constants observed by sampling; `None` where the corresponding
/// nonlinearity is switched off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionsReport {
    /// `min phi''(eta) / |eta|^(p-1)`.
    pub a0_hat: Option<f64>,
    /// `max phi''(eta) / (1 + |eta|^(p-1))`.
    pub a1_hat: Option<f64>,
    /// `min (f'(s) + C) / |s|^q`.
    pub a_hat: Option<f64>,
    /// Smallest `C >= 0` with `f'(s) >= -C` over the samples.
    pub c_hat: Option<f64>,
    /// `max f'(s) / (1 + |s|^q)`.
    pub c_upper_hat: Option<f64>,
    /// Minimum monotonicity gap over sampled pairs.
    pub delta_hat: Option<f64>,
    /// `max [phi'(eta1) - phi'(eta2)](eta1 - eta2) / ((1 + |eta1| + |eta2|)^(p-1) |eta1 - eta2|^2)`.
    pub gap_upper_hat: Option<f64>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Draws `sample_count` magnitudes log-uniformly in `range` (random sign)
/// and reports the tightest constants seen. Deterministic for a fixed seed.
pub fn validate_conditions(
    spec: &NonlinearitySpec,
    sample_count: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<ConditionsReport> {
    const OP: &str = "validate_conditions";
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(OP, format!("range ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let mag = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    };
    let mut notes = Vec::new();
    let mut passed = true;

    let (mut a0_hat, mut a1_hat, mut delta_hat, mut gap_upper_hat) = (None, None, None, None);
    if spec.has_phi() {
        let (mut a0, mut a1) = (f64::INFINITY, 0.0f64);
        let (mut delta, mut upper) = (f64::INFINITY, 0.0f64);
        for _ in 0..sample_count {
            let eta = draw(&mut rng);
            let second = spec.phi_second(eta);
            a0 = a0.min(second / eta.abs().powf(spec.p - 1.0));
            a1 = a1.max(second / (1.0 + eta.abs().powf(spec.p - 1.0)));
            let eta2 = draw(&mut rng);
            if eta2 != eta {
                delta = delta.min(monotonicity_gap(eta, eta2, spec)?);
                let num = (spec.phi_prime(eta) - spec.phi_prime(eta2)) * (eta - eta2);
                let den = (1.0 + eta.abs() + eta2.abs()).powf(spec.p - 1.0) * (eta - eta2).powi(2);
                upper = upper.max(num / den);
            }
        }
        passed &= a0 > 0.0 && delta > 0.0;
        a0_hat = Some(a0);
        a1_hat = Some(a1);
        delta_hat = Some(delta);
        gap_upper_hat = Some(upper);
    } else {
        notes.push("phi is zero: the growth and coercivity condition on phi'' is not applicable".into());
    }

    let (mut a_hat, mut c_hat, mut c_upper_hat) = (None, None, None);
    if spec.has_f() {
        let samples: Vec<f64> = std::iter::once(0.0)
            .chain((0..sample_count).map(|_| draw(&mut rng)))
            .collect();
        let c = samples
            .iter()
            .map(|&s| -spec.f_prime(s))
            .fold(0.0f64, f64::max);
        let a = samples
            .iter()
            .filter(|s| **s != 0.0)
            .map(|&s| (spec.f_prime(s) + c) / s.abs().powf(spec.q))
            .fold(f64::INFINITY, f64::min);
        let cu = samples
            .iter()
            .map(|&s| spec.f_prime(s) / (1.0 + s.abs().powf(spec.q)))
            .fold(0.0f64, f64::max);
        passed &= a > 0.0;
        a_hat = Some(a);
        c_hat = Some(c);
        c_upper_hat = Some(cu);
    } else {
        notes.push("f is zero: the lower bound on f' is not applicable".into());
    }

    Ok(ConditionsReport {
        a0_hat,
        a1_hat,
        a_hat,
        c_hat,
        c_upper_hat,
        delta_hat,
        gap_upper_hat,
        notes,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn f_examples() {
        let s = NonlinearitySpec::power(3.0, 2.0, 0.0);
        assert_eq!(s.f(2.0), 8.0);
        assert_eq!(s.f(-2.0), -8.0);
        let s = NonlinearitySpec::power(3.0, 1.0, 1.0);
        assert_eq!(s.f(1.0), 0.0);
        assert_eq!(s.f_prime(1.0), 1.0);
    }

    #[test]
    fn phi_examples() {
        let s = NonlinearitySpec::power(3.0, 2.0, 0.0);
        assert_eq!((s.phi(2.0), s.phi_prime(2.0), s.phi_second(2.0)), (16.0, 32.0, 48.0));
        let s = NonlinearitySpec::power(2.0, 2.0, 0.0);
        assert_eq!((s.phi(0.0), s.phi_prime(0.0), s.phi_second(0.0)), (0.0, 0.0, 0.0));
        let s = NonlinearitySpec::power(1.0, 2.0, 0.0);
        assert_eq!((s.phi(1.0), s.phi_prime(1.0), s.phi_second(1.0)), (1.0, 2.0, 2.0));
        assert_eq!(s.phi_second(0.0), 2.0);
        assert_eq!(s.phi_prime(0.0), 0.0);
    }

    #[test]
    fn vector_phi_is_radial() {
        let s = NonlinearitySpec::power(3.0, 2.0, 0.0);
        assert_eq!(s.phi_vec(&[3.0, 4.0]), 625.0);
        let g = s.phi_prime_vec(&[3.0, 4.0]);
        // 4 * 25 * (3, 4)
        assert_eq!(g, vec![300.0, 400.0]);
    }

    #[test]
    fn gap_examples() {
        let p3 = NonlinearitySpec::power(3.0, 2.0, 0.0);
        assert!(rel(monotonicity_gap(1.0, -1.0, &p3).unwrap(), 1.0) < 1e-15);
        let p1 = NonlinearitySpec::power(1.0, 2.0, 0.0);
        assert!(rel(monotonicity_gap(0.3, 7.0, &p1).unwrap(), 2.0) < 1e-14);
        // finite-difference limit: phi''(3) / (2 * 3) = 18 / 6
        let p2 = NonlinearitySpec::power(2.0, 2.0, 0.0);
        let limit = p2.phi_second(3.0) / 6.0;
        assert!(rel(monotonicity_gap(3.0, 2.999, &p2).unwrap(), limit) < 0.01);
        assert!(monotonicity_gap(1.5, 1.5, &p2).is_err());
    }

    #[test]
    fn validation_recovers_closed_forms() {
        let r = validate_conditions(&NonlinearitySpec::power(3.0, 2.0, 0.0), 10_000, (1e-3, 1e3), 7)
            .unwrap();
        assert!(rel(r.a0_hat.unwrap(), 12.0) < 1e-12);
        assert!(rel(r.a1_hat.unwrap(), 12.0) < 1e-4);
        assert_eq!(r.c_hat, Some(0.0));
        assert!(rel(r.a_hat.unwrap(), 3.0) < 1e-12);
        assert!(r.passed);

        let r = validate_conditions(&NonlinearitySpec::power(2.0, 1.5, 2.5), 10_000, (1e-3, 1e3), 7)
            .unwrap();
        assert!(rel(r.c_hat.unwrap(), 2.5) < 1e-12);
        assert!(rel(r.a_hat.unwrap(), 2.5) < 1e-9);
    }

    #[test]
    fn validation_flags_zero_phi() {
        let mut spec = NonlinearitySpec::power(3.0, 2.0, 0.0);
        spec.phi_kind = Kind::Zero;
        let r = validate_conditions(&spec, 10_000, (1e-3, 1e3), 1).unwrap();
        assert!(r.a0_hat.is_none() && r.delta_hat.is_none());
        assert!(r.notes.iter().any(|n| n.contains("not applicable")));
    }

    #[test]
    fn exponent_validation() {
        assert!(NonlinearitySpec::power(5.0, 2.0, 0.0).validate(false).is_err());
        assert!(NonlinearitySpec::power(5.0, 2.0, 0.0).validate(true).is_ok());
        assert!(NonlinearitySpec::power(0.5, 2.0, 0.0).validate(false).is_err());
        assert!(NonlinearitySpec::power(2.0, 0.0, 0.0).validate(false).is_err());
        assert!(NonlinearitySpec::power(2.0, 1.0, -1.0).validate(false).is_err());
    }
}
