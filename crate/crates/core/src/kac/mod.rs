//! Green kernels, the Kac moment recursion and the ratio-test estimate of
//! the exponential-moment threshold of hitting times.
//!
//! For the process killed on leaving a domain `D`, the normalized moments
//! `μ_n(x) = E_x T^n / n!` satisfy `μ_0 = 1`, `μ_n = G μ_{n-1}` where `G` is
//! the Green operator of `D`. On the half-line `(a, inf)`, `G = J + K` with
//! `J f(x) = (S(x) - S(a)) ∫_x^∞ f dm` and `K f(x) = ∫_a^x (S(y) - S(a)) f dm`.

mod coefficients;
mod green;
mod moments;
mod panels;

pub use coefficients::{coefficient_table, CoefficientTable, MAX_COEFFICIENT_DEPTH};
pub use green::{green_bounded, green_halfline, GreenKernel, Interval};
pub use moments::{
    aitken, analyze_ratios, estimate_lambda, exit_moments, hitting_moments, LambdaEstimate,
    MomentTable, PointEstimate, DEFAULT_DEPTH, STABILIZATION_TOL, STABLE_WINDOW,
};
pub use panels::{Operator, PanelFunction, PanelSpace};

use crate::error::{Error, Result};
use crate::model::Side;

/// `J f` or `K f` on the upper half-line of the space's anchor.
pub fn jk_apply(space: &PanelSpace, which: Operator, f: &PanelFunction) -> Result<PanelFunction> {
    match space.interval {
        Interval::HalfLine { side: Side::Plus, .. } => {}
        _ => return Err(Error::Domain("J and K act on an upper half-line".into())),
    }
    if f.nodes.iter().any(|v| *v < 0.0) {
        return Err(Error::Domain("J and K are applied to nonnegative functions".into()));
    }
    space.apply(which, f)
}

#[cfg(test)]
mod tests;
