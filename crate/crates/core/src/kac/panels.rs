//! Nyström discretization of the Green operators.
//!
//! The domain is cut into panels whose boundaries contain the model cells,
//! the interval ends and the requested grid. Functions are held by their
//! values at the Gauss nodes of every panel; integrals `∫ h dm` from either
//! end up to a node are taken by integrating the panel interpolant, so the
//! operators act directly on node values. Grid points are panel boundaries
//! and are evaluated from full-panel sums.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Diffusion, Side};
use crate::quadrature::GaussRule;

use super::Interval;

/// Operators on functions of the half-line `(a, inf)`:
/// `J f(x) = (S(x) - S(a)) ∫_x^∞ f dm`, `K f(x) = ∫_a^x (S(y) - S(a)) f(y) m(dy)`
/// and the Green operator `G = J + K`. On the lower side the roles of the two
/// ends are mirrored; on a bounded interval only `G` is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    G,
    J,
    K,
}

/// A function known at the panel nodes and at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFunction {
    pub nodes: Vec<f64>,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PanelSpace {
    pub interval: Interval,
    rule: Arc<GaussRule>,
    /// Panel boundaries `t_0 < ... < t_K` covering the truncated domain.
    bounds: Vec<f64>,
    nodes: Vec<f64>,
    /// `∫_{t_k}^{node}` and `∫_{node}^{t_{k+1}}` rows in local coordinates.
    left_rows: Vec<Vec<f64>>,
    right_rows: Vec<Vec<f64>>,
    half: Vec<f64>,
    speed: Vec<f64>,
    /// Scale distance to the lower / upper end of the domain, at nodes and at
    /// boundaries. Infinite for an open end.
    from_lo: Vec<f64>,
    from_hi: Vec<f64>,
    bound_from_lo: Vec<f64>,
    bound_from_hi: Vec<f64>,
    /// Speed atoms sitting on the panel boundaries.
    atoms: Vec<f64>,
    /// Speed mass beyond the truncated open end, if any.
    tail_lo: f64,
    tail_hi: f64,
    grid: Vec<f64>,
    grid_idx: Vec<usize>,
}

impl PanelSpace {
    /// Discretizes `interval` for `diffusion`, with `grid` as output points.
    /// An open end of a half-line is truncated at the window edge and the
    /// mass beyond it is attached to the edge value.
    pub fn new(diffusion: &Diffusion, interval: Interval, grid: &[f64]) -> Result<Self> {
        let w = diffusion.window();
        let (lo, hi) = match interval {
            Interval::Bounded { a, b } => {
                if !(a < b) {
                    return Err(Error::Domain(format!("empty interval ({a}, {b})")));
                }
                if a < w.lo || b > w.hi {
                    return Err(Error::Domain(format!(
                        "interval ({a}, {b}) leaves the window [{}, {}]",
                        w.lo, w.hi
                    )));
                }
                (a, b)
            }
            Interval::HalfLine { a, side } => {
                if !(w.lo < a && a < w.hi) {
                    return Err(Error::Domain(format!(
                        "anchor {a} not inside the window ({}, {})",
                        w.lo, w.hi
                    )));
                }
                match side {
                    Side::Plus => (a, w.hi),
                    Side::Minus => (w.lo, a),
                }
            }
        };
        for &x in grid {
            if !(lo <= x && x <= hi) || !x.is_finite() {
                return Err(Error::Domain(format!("grid point {x} outside [{lo}, {hi}]")));
            }
        }

        let merge = 1e-12 * (hi - lo);
        let mut bounds: Vec<f64> = diffusion
            .cell_breaks()
            .iter()
            .copied()
            .filter(|&t| t > lo + merge && t < hi - merge)
            .collect();
        bounds.push(lo);
        bounds.push(hi);
        bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Insert the grid exactly, dropping model breaks that crowd it.
        let mut sorted_grid: Vec<f64> = grid.to_vec();
        sorted_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted_grid.dedup();
        bounds.retain(|t| {
            *t == lo || *t == hi || !sorted_grid.iter().any(|g| (g - t).abs() <= merge && g != t)
        });
        bounds.extend(sorted_grid.iter().copied());
        bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bounds.dedup();

        let tab = diffusion.tabulation();
        let tab_rule = tab.rule.clone();
        let rule = tab_rule;
        let p = rule.order();
        let k = bounds.len() - 1;
        let mut left_rows = Vec::with_capacity(p);
        let mut right_rows = Vec::with_capacity(p);
        for i in 0..p {
            let l = rule.partial_row(i).to_vec();
            let r: Vec<f64> = rule.weights.iter().zip(&l).map(|(w, v)| w - v).collect();
            left_rows.push(l);
            right_rows.push(r);
        }

        let open_lo = matches!(interval, Interval::HalfLine { side: Side::Minus, .. });
        let open_hi = matches!(interval, Interval::HalfLine { side: Side::Plus, .. });
        let dist_lo = |x: f64| if open_lo { f64::INFINITY } else { tab.scale_between(lo, x) };
        let dist_hi = |x: f64| if open_hi { f64::INFINITY } else { tab.scale_between(x, hi) };

        let mut nodes = Vec::with_capacity(k * p);
        let mut half = Vec::with_capacity(k);
        for wdw in bounds.windows(2) {
            let c = 0.5 * (wdw[0] + wdw[1]);
            let h = 0.5 * (wdw[1] - wdw[0]);
            half.push(h);
            nodes.extend(rule.nodes.iter().map(|t| c + h * t));
        }
        let speed: Vec<f64> = nodes.iter().map(|&x| tab.speed_density(x)).collect();
        let from_lo: Vec<f64> = nodes.iter().map(|&x| dist_lo(x)).collect();
        let from_hi: Vec<f64> = nodes.iter().map(|&x| dist_hi(x)).collect();
        let bound_from_lo: Vec<f64> = bounds.iter().map(|&x| dist_lo(x)).collect();
        let bound_from_hi: Vec<f64> = bounds.iter().map(|&x| dist_hi(x)).collect();
        let atoms: Vec<f64> = bounds.iter().map(|&x| tab.atom_exactly_at(x)).collect();
        let tail_lo = if open_lo { tab.tail_lo } else { 0.0 };
        let tail_hi = if open_hi { tab.tail_hi } else { 0.0 };
        let grid_idx = grid
            .iter()
            .map(|g| bounds.binary_search_by(|t| t.partial_cmp(g).unwrap()).unwrap())
            .collect();

        Ok(PanelSpace {
            interval,
            rule,
            bounds,
            nodes,
            left_rows,
            right_rows,
            half,
            speed,
            from_lo,
            from_hi,
            bound_from_lo,
            bound_from_hi,
            atoms,
            tail_lo,
            tail_hi,
            grid: grid.to_vec(),
            grid_idx,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn panels(&self) -> usize {
        self.half.len()
    }

    pub fn constant(&self, c: f64) -> PanelFunction {
        PanelFunction {
            nodes: vec![c; self.nodes.len()],
            grid: vec![c; self.grid.len()],
        }
    }

    /// Samples `f` at the nodes and grid points.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> PanelFunction {
        PanelFunction {
            nodes: self.nodes.iter().map(|&x| f(x)).collect(),
            grid: self.grid.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Value at panel boundary `k` by interpolation of node values.
    fn at_bound(&self, f: &[f64], k: usize) -> f64 {
        let p = self.rule.order();
        let (cell, s) = if k == 0 { (0, -1.0) } else { (k - 1, 1.0) };
        self.rule.interpolate(&f[cell * p..(cell + 1) * p], s)
    }

    /// Integrals of `h dm` from the lower end, at nodes `(node)` and at
    /// boundaries (closed on the right, atoms included).
    fn cumulate_left(&self, h: &[f64], hb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.rule.order();
        let k = self.panels();
        let mut at_bounds = vec![0.0; k + 1];
        let mut at_nodes = vec![0.0; k * p];
        let mut acc = self.tail_lo * hb[0];
        for c in 0..k {
            let g: Vec<f64> = (0..p).map(|j| h[c * p + j] * self.speed[c * p + j]).collect();
            at_bounds[c] = acc + self.atoms[c] * hb[c];
            let base = at_bounds[c];
            for i in 0..p {
                let part: f64 = self.left_rows[i].iter().zip(&g).map(|(a, b)| a * b).sum();
                at_nodes[c * p + i] = base + self.half[c] * part;
            }
            let full: f64 = self.rule.weights.iter().zip(&g).map(|(a, b)| a * b).sum();
            acc = base + self.half[c] * full;
        }
        at_bounds[k] = acc + self.atoms[k] * hb[k];
        (at_nodes, at_bounds)
    }

    /// Integrals of `h dm` up to the upper end, open on the left at
    /// boundaries.
    fn cumulate_right(&self, h: &[f64], hb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.rule.order();
        let k = self.panels();
        let mut at_bounds = vec![0.0; k + 1];
        let mut at_nodes = vec![0.0; k * p];
        let mut acc = self.tail_hi * hb[k];
        at_bounds[k] = acc;
        for c in (0..k).rev() {
            let g: Vec<f64> = (0..p).map(|j| h[c * p + j] * self.speed[c * p + j]).collect();
            let base = acc + self.atoms[c + 1] * hb[c + 1];
            for i in 0..p {
                let part: f64 = self.right_rows[i].iter().zip(&g).map(|(a, b)| a * b).sum();
                at_nodes[c * p + i] = base + self.half[c] * part;
            }
            let full: f64 = self.rule.weights.iter().zip(&g).map(|(a, b)| a * b).sum();
            acc = base + self.half[c] * full;
            at_bounds[c] = acc;
        }
        (at_nodes, at_bounds)
    }

    fn bound_values(&self, f: &[f64]) -> Vec<f64> {
        (0..=self.panels()).map(|k| self.at_bound(f, k)).collect()
    }

    /// Applies one of the operators to node values of `f`.
    pub fn apply(&self, op: Operator, f: &PanelFunction) -> Result<PanelFunction> {
        if f.nodes.len() != self.nodes.len() {
            return Err(Error::Domain("function does not belong to this panel space".into()));
        }
        let fb = self.bound_values(&f.nodes);
        let (nodes, bounds) = match self.interval {
            Interval::Bounded { .. } => {
                if op != Operator::G {
                    return Err(Error::Domain("J and K are defined on half-lines only".into()));
                }
                self.apply_bounded(&f.nodes, &fb)
            }
            Interval::HalfLine { side, .. } => self.apply_halfline(op, side, &f.nodes, &fb),
        };
        let grid: Vec<f64> = self.grid_idx.iter().map(|&k| bounds[k]).collect();
        if nodes.iter().chain(&grid).any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure {
                lo: self.bounds[0],
                hi: *self.bounds.last().unwrap(),
                detail: "operator produced non-finite values".into(),
            });
        }
        Ok(PanelFunction { nodes, grid })
    }

    fn apply_bounded(&self, f: &[f64], fb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let width = self.bound_from_lo[self.panels()];
        let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
        let (ln, lb) = self.cumulate_left(&mul(f, &self.from_lo), &mul(fb, &self.bound_from_lo));
        let (rn, rb) = self.cumulate_right(&mul(f, &self.from_hi), &mul(fb, &self.bound_from_hi));
        let combine = |l: &[f64], r: &[f64], dlo: &[f64], dhi: &[f64]| -> Vec<f64> {
            (0..l.len())
                .map(|i| (dhi[i] * l[i] + dlo[i] * r[i]) / width)
                .collect()
        };
        (
            combine(&ln, &rn, &self.from_lo, &self.from_hi),
            combine(&lb, &rb, &self.bound_from_lo, &self.bound_from_hi),
        )
    }

    fn apply_halfline(&self, op: Operator, side: Side, f: &[f64], fb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let nb = self.bounds.len();
        // distance to the anchor
        let (dn, db) = match side {
            Side::Plus => (&self.from_lo, &self.bound_from_lo),
            Side::Minus => (&self.from_hi, &self.bound_from_hi),
        };
        let mut out_n = vec![0.0; n];
        let mut out_b = vec![0.0; nb];
        if matches!(op, Operator::G | Operator::K) {
            let hn: Vec<f64> = f.iter().zip(dn).map(|(a, b)| a * b).collect();
            let hb: Vec<f64> = fb.iter().zip(db).map(|(a, b)| a * b).collect();
            let (kn, kb) = match side {
                Side::Plus => self.cumulate_left(&hn, &hb),
                Side::Minus => self.cumulate_right(&hn, &hb),
            };
            out_n.iter_mut().zip(&kn).for_each(|(o, v)| *o += v);
            out_b.iter_mut().zip(&kb).for_each(|(o, v)| *o += v);
        }
        if matches!(op, Operator::G | Operator::J) {
            let (jn, jb) = match side {
                Side::Plus => self.cumulate_right(f, fb),
                Side::Minus => self.cumulate_left(f, fb),
            };
            for i in 0..n {
                out_n[i] += dn[i] * jn[i];
            }
            for i in 0..nb {
                out_b[i] += db[i] * jb[i];
            }
        }
        (out_n, out_b)
    }

    /// `∫ f dm` over the domain, tail beyond a truncated end included.
    pub fn integrate(&self, f: &PanelFunction) -> f64 {
        let fb = self.bound_values(&f.nodes);
        let (_, b) = self.cumulate_left(&f.nodes, &fb);
        b[self.panels()] + self.tail_hi * fb[self.panels()]
    }

    /// Mass the truncation attaches to the edge value, per unit of `f`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_lo + self.tail_hi
    }
}
