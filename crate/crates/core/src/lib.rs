//! Exponential moments of hitting times, Hardy and Poincaré constants and
//! spectral gaps of positively recurrent one-dimensional diffusions.
//!
//! Three independent routes compute the same characteristic quantities:
//!
//! * [`kac`]: Green kernels and the moment recursion `μ_n = G μ_{n-1}`,
//! * [`spectral`]: a finite-volume discretization of `d/dm d/dS`,
//! * [`montecarlo`]: Euler–Maruyama simulation of hitting times.
//!
//! [`constants`] evaluates `B_a^±` and assembles the sandwich reports that tie
//! the three routes together.

// `!(a < b)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod error;
pub mod expr;
pub mod kac;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod serde_float;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Diffusion, DiffusionSpec, Side, Window};
