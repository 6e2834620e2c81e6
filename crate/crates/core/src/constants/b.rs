use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Diffusion, Side};
use crate::serde_float;

/// Points of the coarse scan of the defining product.
pub const SCAN_POINTS: usize = 512;
/// A product still rising at the window edge and this many times its median
/// is declared infinite.
pub const DIVERGENCE_RATIO: f64 = 1e6;

/// One side of `B_a^±`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSearch {
    pub side: Side,
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(with = "serde_float")]
    pub argmax: f64,
    /// The value was attained as a one-sided limit at a speed atom.
    pub at_atom: bool,
    pub infinite: bool,
    /// The maximum sits at the window edge even after one widening.
    pub at_edge: bool,
    pub widened: bool,
    pub local_maxima: usize,
    /// Relative change of the value during golden-section refinement.
    #[serde(with = "serde_float")]
    pub refinement_change: f64,
}

/// `B_a^+ = sup_{x ≥ a} m((x, ∞)) (S(x) - S(a))` and
/// `B_a^- = sup_{x ≤ a} m((-∞, x)) (S(a) - S(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BConstants {
    pub a: f64,
    pub plus: BSearch,
    pub minus: BSearch,
}

impl BConstants {
    pub fn b_plus(&self) -> f64 {
        self.plus.value
    }

    pub fn b_minus(&self) -> f64 {
        self.minus.value
    }

    pub fn side(&self, side: Side) -> &BSearch {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
}

/// The product whose supremum defines `B_a^±`, at a single point.
pub fn b_product(d: &Diffusion, a: f64, side: Side, x: f64) -> f64 {
    match side {
        Side::Plus if x >= a => d.speed().above(x) * d.scale().between(a, x),
        Side::Minus if x <= a => d.speed().below_open(x) * d.scale().between(x, a),
        _ => 0.0,
    }
}

/// Left (upper side) or right (lower side) limit of the product at an atom,
/// where the open tail still contains the atom.
fn product_limit_at_atom(d: &Diffusion, a: f64, side: Side, x: f64) -> f64 {
    match side {
        Side::Plus => d.speed().above_closed(x) * d.scale().between(a, x),
        Side::Minus => d.speed().cumulative(x) * d.scale().between(x, a),
    }
}

/// Supremum by plain evaluation on `points` equispaced points between `a`
/// and the window edge. Used as an independent check of [`compute_b`].
pub fn b_brute_force(d: &Diffusion, a: f64, side: Side, points: usize) -> f64 {
    let edge = match side {
        Side::Plus => d.window().hi,
        Side::Minus => d.window().lo,
    };
    (0..=points)
        .map(|i| a + (edge - a) * i as f64 / points as f64)
        .map(|x| b_product(d, a, side, x))
        .fold(0.0, f64::max)
}

/// `B_a^±` by a coarse scan, golden-section refinement of each local maximum
/// and evaluation of one-sided limits at atoms.
pub fn compute_b(d: &Diffusion, a: f64, side: Side) -> Result<BSearch> {
    d.require_certificate()?;
    let w = d.window();
    if !(w.lo <= a && a <= w.hi) {
        return Err(Error::Domain(format!("anchor {a} outside the window")));
    }
    let first = search(d, a, side);
    if !first.at_edge || first.infinite {
        return Ok(first);
    }
    match d.widened(2.0) {
        Ok(wide) => {
            let mut second = search(&wide, a, side);
            second.widened = true;
            Ok(second)
        }
        Err(_) => Ok(first),
    }
}

pub fn compute_b_constants(d: &Diffusion, a: f64) -> Result<BConstants> {
    Ok(BConstants {
        a,
        plus: compute_b(d, a, Side::Plus)?,
        minus: compute_b(d, a, Side::Minus)?,
    })
}

fn search(d: &Diffusion, a: f64, side: Side) -> BSearch {
    let edge = match side {
        Side::Plus => d.window().hi,
        Side::Minus => d.window().lo,
    };
    let xs: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| a + (edge - a) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let ps: Vec<f64> = xs.iter().map(|&x| b_product(d, a, side, x)).collect();
    let n = xs.len();

    let mut best = (0.0, a, false);
    let mut scanned_best = 0.0_f64;
    let mut maxima = 0;
    for i in 1..n {
        let left_ok = ps[i] >= ps[i - 1];
        let right_ok = i + 1 == n || ps[i] >= ps[i + 1];
        if !(left_ok && right_ok) || ps[i] <= 0.0 {
            continue;
        }
        maxima += 1;
        scanned_best = scanned_best.max(ps[i]);
        let hi = if i + 1 < n { xs[i + 1] } else { xs[i] };
        let (x, v) = golden_max(|x| b_product(d, a, side, x), xs[i - 1], hi);
        let (x, v) = if v >= ps[i] { (x, v) } else { (xs[i], ps[i]) };
        if v > best.0 {
            best = (v, x, false);
        }
    }
    for (pos, _) in d.speed().atoms() {
        let inside = match side {
            Side::Plus => pos > a,
            Side::Minus => pos < a,
        };
        if inside {
            let v = product_limit_at_atom(d, a, side, pos);
            if v > best.0 {
                best = (v, pos, true);
            }
        }
    }

    let rising_at_edge = ps[n - 1] >= ps[n - 2] && ps[n - 1] > 0.0;
    let step = (edge - a).abs() / SCAN_POINTS as f64;
    let at_edge = rising_at_edge && (best.1 - edge).abs() <= step;
    let mut sorted = ps.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = sorted[n / 2];
    let infinite = at_edge && ps[n - 1] > DIVERGENCE_RATIO * median && median > 0.0;
    BSearch {
        side,
        value: if infinite { f64::INFINITY } else { best.0 },
        argmax: best.1,
        at_atom: best.2,
        infinite,
        at_edge,
        widened: false,
        local_maxima: maxima,
        refinement_change: if best.0 > 0.0 {
            (best.0 - scanned_best).abs() / best.0
        } else {
            0.0
        },
    }
}

/// Golden-section search for a maximum of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    if fc >= fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

/// `[1/(4B), 1/B]` with `1/∞ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    #[serde(with = "serde_float")]
    pub lower: f64,
    #[serde(with = "serde_float")]
    pub upper: f64,
    /// `B = 0`: the bounds say nothing from above.
    pub no_upper_constraint: bool,
}

impl LambdaBounds {
    pub fn contains(&self, v: f64, rel_tol: f64) -> bool {
        v >= self.lower * (1.0 - rel_tol) && (self.no_upper_constraint || v <= self.upper * (1.0 + rel_tol))
    }
}

pub fn lambda_bounds(b: f64) -> LambdaBounds {
    if b.is_infinite() {
        LambdaBounds {
            lower: 0.0,
            upper: 0.0,
            no_upper_constraint: false,
        }
    } else if b == 0.0 {
        LambdaBounds {
            lower: 0.0,
            upper: f64::INFINITY,
            no_upper_constraint: true,
        }
    } else {
        LambdaBounds {
            lower: 1.0 / (4.0 * b),
            upper: 1.0 / b,
            no_upper_constraint: false,
        }
    }
}
