use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScaleFunction, Side};

/// Domain of a killed process: a bounded interval or a half-line beyond an
/// anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Interval {
    Bounded { a: f64, b: f64 },
    /// `(a, +inf)` for `Side::Plus`, `(-inf, a)` for `Side::Minus`.
    HalfLine { a: f64, side: Side },
}

impl Interval {
    pub fn contains_closed(&self, x: f64) -> bool {
        match *self {
            Interval::Bounded { a, b } => a <= x && x <= b,
            Interval::HalfLine { a, side: Side::Plus } => x >= a,
            Interval::HalfLine { a, side: Side::Minus } => x <= a,
        }
    }
}

/// Green kernel of the process killed on leaving `interval`, as a function of
/// the scale function only.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub interval: Interval,
    scale: ScaleFunction,
}

impl GreenKernel {
    pub fn new(interval: Interval, scale: ScaleFunction) -> Result<Self> {
        if let Interval::Bounded { a, b } = interval {
            if !(a < b) {
                return Err(Error::Domain(format!("empty interval ({a}, {b})")));
            }
        }
        Ok(GreenKernel { interval, scale })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self.interval {
            Interval::Bounded { a, b } => green_bounded(&self.scale, a, b, x, y),
            Interval::HalfLine { a, side } => green_halfline(&self.scale, side, a, x, y),
        }
    }
}

/// `G(a, b, x, y) = (S(b) - S(x ∨ y)) (S(x ∧ y) - S(a)) / (S(b) - S(a))`.
pub fn green_bounded(s: &ScaleFunction, a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Domain(format!("empty interval ({a}, {b})")));
    }
    for v in [x, y] {
        if !(a <= v && v <= b) {
            return Err(Error::Domain(format!("{v} outside [{a}, {b}]")));
        }
    }
    let (lo, hi) = if y <= x { (y, x) } else { (x, y) };
    Ok(s.between(hi, b) * s.between(a, lo) / s.between(a, b))
}

/// Monotone limit of the bounded kernel as the far endpoint goes to infinity:
/// `S(x ∧ ξ) - S(a)` on the upper side, `S(a) - S(x ∨ ξ)` on the lower side.
pub fn green_halfline(s: &ScaleFunction, side: Side, a: f64, x: f64, xi: f64) -> Result<f64> {
    let on_side = |v: f64| match side {
        Side::Plus => v >= a,
        Side::Minus => v <= a,
    };
    for v in [x, xi] {
        if !on_side(v) {
            return Err(Error::Domain(format!("{v} not on the {side} side of {a}")));
        }
    }
    Ok(match side {
        Side::Plus => s.between(a, x.min(xi)),
        Side::Minus => s.between(x.max(xi), a),
    })
}
