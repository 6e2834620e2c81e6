//! Gauss–Legendre panels with spectral partial integration.
//!
//! Every continuous quantity in the crate (scale function, speed measure,
//! Green operators) is represented by its values at the Gauss–Legendre nodes
//! of a set of panels. Integrals from a panel's left end to an arbitrary point
//! inside it are taken by integrating the Lagrange interpolant exactly.

use crate::error::{Error, Result};

/// Gauss–Legendre rule on [-1, 1] with the tables needed for partial
/// integration and interpolation.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
    /// `partial[i][j] = ∫_{-1}^{nodes[i]} ℓ_j(t) dt`
    partial: Vec<Vec<f64>>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "Gauss rule needs at least two nodes");
        let (nodes, weights) = legendre_nodes(order);
        let bary = barycentric_weights(&nodes);
        let mut rule = GaussRule {
            nodes,
            weights,
            bary,
            partial: Vec::new(),
        };
        let partial = rule.nodes.iter().map(|&s| rule.partial_weights(s)).collect();
        rule.partial = partial;
        rule
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Lagrange basis values at `t` (barycentric form).
    pub fn basis(&self, t: f64, out: &mut [f64]) {
        for (j, &y) in self.nodes.iter().enumerate() {
            if t == y {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
        }
        let mut denom = 0.0;
        for ((o, b), x) in out.iter_mut().zip(&self.bary).zip(&self.nodes) {
            let w = b / (t - x);
            *o = w;
            denom += w;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    /// Weights `w_j(s) = ∫_{-1}^{s} ℓ_j(t) dt` for `s` in [-1, 1].
    pub fn partial_weights(&self, s: f64) -> Vec<f64> {
        let p = self.nodes.len();
        let mut out = vec![0.0; p];
        if s <= -1.0 {
            return out;
        }
        if s >= 1.0 {
            out.copy_from_slice(&self.weights);
            return out;
        }
        let half = 0.5 * (s + 1.0);
        let mut ell = vec![0.0; p];
        for (q, &tq) in self.nodes.iter().enumerate() {
            let t = -1.0 + half * (tq + 1.0);
            self.basis(t, &mut ell);
            let wq = half * self.weights[q];
            for j in 0..p {
                out[j] += wq * ell[j];
            }
        }
        out
    }

    /// Partial-integration row for the `i`-th node.
    pub fn partial_row(&self, i: usize) -> &[f64] {
        &self.partial[i]
    }

    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let mut ell = vec![0.0; values.len()];
        self.basis(s, &mut ell);
        ell.iter().zip(values).map(|(l, v)| l * v).sum()
    }
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    // Rescale so the largest weight is one; the formula is scale invariant.
    let max = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= max);
    w
}

/// Fixed Gauss rule applied on [lo, hi].
pub fn gauss_integrate<F: Fn(f64) -> f64>(rule: &GaussRule, f: &F, lo: f64, hi: f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| w * f(c + h * t))
        .sum::<f64>()
        * h
}

/// Adaptive bisection driven by the difference between one panel and its two
/// halves. Returns the integral and the accumulated error estimate.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(
    rule: &GaussRule,
    f: &F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_depth: usize,
) -> Result<(f64, f64)> {
    let whole = gauss_integrate(rule, f, lo, hi);
    let (value, err) = adapt_rec(rule, f, lo, hi, whole, rel_tol, abs_tol, max_depth)?;
    if !value.is_finite() {
        return Err(Error::QuadratureFailure {
            lo,
            hi,
            detail: "non-finite integrand".into(),
        });
    }
    Ok((value, err))
}

#[allow(clippy::too_many_arguments)]
fn adapt_rec<F: Fn(f64) -> f64>(
    rule: &GaussRule,
    f: &F,
    lo: f64,
    hi: f64,
    whole: f64,
    rel_tol: f64,
    abs_tol: f64,
    depth: usize,
) -> Result<(f64, f64)> {
    let mid = 0.5 * (lo + hi);
    let left = gauss_integrate(rule, f, lo, mid);
    let right = gauss_integrate(rule, f, mid, hi);
    let both = left + right;
    let err = (both - whole).abs();
    if !both.is_finite() || err <= abs_tol.max(rel_tol * both.abs()) {
        return Ok((both, err));
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure {
            lo,
            hi,
            detail: format!("error estimate {err:e} after maximal bisection"),
        });
    }
    let (l, el) = adapt_rec(rule, f, lo, mid, left, rel_tol, 0.5 * abs_tol, depth - 1)?;
    let (r, er) = adapt_rec(rule, f, mid, hi, right, rel_tol, 0.5 * abs_tol, depth - 1)?;
    Ok((l + r, el + er))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussRule::new(8);
        let v = gauss_integrate(&rule, &|x: f64| x.powi(15) + 3.0 * x.powi(6), 0.0, 2.0);
        let exact = 2f64.powi(16) / 16.0 + 3.0 * 2f64.powi(7) / 7.0;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn partial_weights_match_antiderivative() {
        let rule = GaussRule::new(10);
        let f: Vec<f64> = rule.nodes.iter().map(|&t| t * t * t - t + 2.0).collect();
        for s in [-0.9, -0.1, 0.3, 0.77] {
            let w = rule.partial_weights(s);
            let got: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            let anti = |t: f64| t.powi(4) / 4.0 - t * t / 2.0 + 2.0 * t;
            assert!((got - (anti(s) - anti(-1.0))).abs() < 1e-13);
        }
        let row = rule.partial_row(3);
        let got: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
        let s = rule.nodes[3];
        let anti = |t: f64| t.powi(4) / 4.0 - t * t / 2.0 + 2.0 * t;
        assert!((got - (anti(s) - anti(-1.0))).abs() < 1e-13);
    }

    #[test]
    fn interpolation_reproduces_smooth_function() {
        let rule = GaussRule::new(12);
        let f: Vec<f64> = rule.nodes.iter().map(|&t| (0.3 * t).exp()).collect();
        let v = rule.interpolate(&f, 0.41);
        assert!((v - (0.3f64 * 0.41).exp()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let rule = GaussRule::new(10);
        let (v, _) =
            adaptive_integrate(&rule, &|x: f64| (-x * x / 2.0).exp(), -12.0, 12.0, 1e-12, 1e-15, 30)
                .unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }
}
