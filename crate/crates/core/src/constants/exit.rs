use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kac::{Interval, PanelSpace};
use crate::model::Diffusion;
use crate::serde_float;

/// Upper bound on the mean exit time from `(a, b)`, giving `λ_{a,b} ≥ 1/C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitUpper {
    pub a: f64,
    pub b: f64,
    #[serde(with = "serde_float")]
    pub c: f64,
    /// `1/C`, infinite when `(a, b)` carries no speed mass.
    #[serde(with = "serde_float")]
    pub lambda_lower: f64,
    pub empty_mass: bool,
}

/// `C = (1/(S(b) - S(a))) ∫_a^b (S(b) - S(y)) (S(y) - S(a)) m(dy)`.
pub fn exit_upper_constant(d: &Diffusion, a: f64, b: f64) -> Result<ExitUpper> {
    let space = PanelSpace::new(d, Interval::Bounded { a, b }, &[])?;
    let s = d.scale();
    let width = s.between(a, b);
    let f = space.sample(|y| s.between(y, b) * s.between(a, y) / width);
    let c = space.integrate(&f);
    if !c.is_finite() {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            detail: "exit constant is not finite".into(),
        });
    }
    let empty_mass = c <= 0.0;
    Ok(ExitUpper {
        a,
        b,
        c,
        lambda_lower: if empty_mass { f64::INFINITY } else { 1.0 / c },
        empty_mass,
    })
}

/// Both exit-time bounds for `(a, b)` with inner interval `[a', b']`:
/// `1/C ≤ λ_{a,b} ≤ 1/c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitBounds {
    pub a: f64,
    pub b: f64,
    pub inner: (f64, f64),
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(with = "serde_float")]
    pub c_upper: f64,
    #[serde(with = "serde_float")]
    pub c_lower: f64,
    #[serde(with = "serde_float")]
    pub lambda_lower: f64,
    #[serde(with = "serde_float")]
    pub lambda_upper: f64,
}

impl ExitBounds {
    pub fn contains(&self, lambda: f64, rel_tol: f64) -> bool {
        lambda >= self.lambda_lower * (1.0 - rel_tol) && lambda <= self.lambda_upper * (1.0 + rel_tol)
    }
}

/// `κ₁ = (S(a') - S(a)) / (S(b') - S(a'))`, `κ₂ = (S(b) - S(b')) / (S(b') - S(a'))`,
/// `c = κ₁κ₂ / (1 + κ₁ + κ₂) · (S(b') - S(a')) · m([a', b'])`.
pub fn exit_lower_constant(d: &Diffusion, a: f64, b: f64, a_in: f64, b_in: f64) -> Result<ExitBounds> {
    if !(a < a_in && a_in < b_in && b_in < b) {
        return Err(Error::Domain(format!(
            "need a < a' < b' < b, got {a}, {a_in}, {b_in}, {b}"
        )));
    }
    let s = d.scale();
    let inner = s.between(a_in, b_in);
    let kappa1 = s.between(a, a_in) / inner;
    let kappa2 = s.between(b_in, b) / inner;
    let mass = d.speed().closed(a_in, b_in);
    let c_lower = kappa1 * kappa2 / (1.0 + kappa1 + kappa2) * inner * mass;
    let upper = exit_upper_constant(d, a, b)?;
    Ok(ExitBounds {
        a,
        b,
        inner: (a_in, b_in),
        kappa1,
        kappa2,
        c_upper: upper.c,
        c_lower,
        lambda_lower: upper.lambda_lower,
        lambda_upper: if c_lower > 0.0 { 1.0 / c_lower } else { f64::INFINITY },
    })
}

/// An interval `(a, b) ⊃ [a', b'] ∋ x` with `κ₁ = κ₂ = 1` on which `E_x e^{λ T} = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingScan {
    pub x: f64,
    pub lambda: f64,
    pub a: f64,
    pub a_inner: f64,
    pub b_inner: f64,
    pub b: f64,
    /// `(S(b') - S(a')) m([a', b'])`.
    pub product: f64,
    /// `3/λ`.
    pub needed: f64,
    pub steps: usize,
}

/// Widens `[a', b']` around `x` geometrically until
/// `(S(b') - S(a')) m([a', b']) > 3/λ`, keeping the outer interval with
/// `κ₁ = κ₂ = 1` inside the window.
pub fn vanishing_lambda_scan(d: &Diffusion, x: f64, lambda: f64) -> Result<VanishingScan> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ = {lambda} must be positive")));
    }
    d.require_certificate()?;
    let w = d.window();
    if !(w.lo < x && x < w.hi) {
        return Err(Error::Domain(format!("{x} outside the window")));
    }
    let s = d.scale();
    let (s_lo, s_hi) = (s.eval(w.lo), s.eval(w.hi));
    let needed = 3.0 / lambda;
    let outer = |ai: f64, bi: f64| -> Option<(f64, f64)> {
        let delta = s.between(ai, bi);
        let (sa, sb) = (s.eval(ai) - delta, s.eval(bi) + delta);
        if sa > s_lo && sb < s_hi {
            Some((s.inverse(sa), s.inverse(sb)))
        } else {
            None
        }
    };
    let product = |ai: f64, bi: f64| s.between(ai, bi) * d.speed().closed(ai, bi);

    let base = w.width() / 4096.0;
    let (mut left, mut right) = (base, base);
    let mut best = 0.0_f64;
    for step in 0..400 {
        let (ai, bi) = (x - left, x + right);
        if let Some((a, b)) = outer(ai, bi) {
            let p = product(ai, bi);
            best = best.max(p);
            if p > needed {
                return Ok(VanishingScan {
                    x,
                    lambda,
                    a,
                    a_inner: ai,
                    b_inner: bi,
                    b,
                    product: p,
                    needed,
                    steps: step + 1,
                });
            }
        }
        // Grow each side when the outer interval still fits; otherwise try a
        // smaller increment on that side only.
        let mut grown = false;
        for grow_left in [true, false] {
            let mut inc = if grow_left { left } else { right };
            while inc > 1e-9 * base {
                let (l, r) = if grow_left { (left + inc, right) } else { (left, right + inc) };
                if outer(x - l, x + r).is_some() {
                    left = l;
                    right = r;
                    grown = true;
                    break;
                }
                inc *= 0.5;
            }
        }
        if !grown {
            break;
        }
    }
    Err(Error::WindowExceeded {
        achieved: best,
        needed,
    })
}
