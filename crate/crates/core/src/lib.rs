//! Pseudo-spectral lab for quasi-linear strongly damped wave equations
//! `∂ₜ²u - γΔ∂ₜu - Δu - div φ'(∇u) + f(u) = g` on boxes with Dirichlet walls.
//!
//! The [`spectral`] basis carries fields, [`integrator`] advances them,
//! [`diagnostics`] measures them and [`experiments`] turns a TOML config
//! into tables and pass/fail checks. [`variants`] holds the Kirchhoff,
//! membrane and structural families.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod nonlinearity;
pub mod spectral;
pub mod variants;

pub use error::{Error, Result};
