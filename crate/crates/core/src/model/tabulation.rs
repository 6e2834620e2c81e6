//! Cell tabulation shared by the scale function and the speed measure.
//!
//! The window is cut into cells. In each cell the scale density `S'` and the
//! speed density `m'` are stored at Gauss nodes; cumulative values are stored
//! at the cell boundaries. Cumulative speed mass is kept from both ends so
//! tail masses keep full relative precision.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

use super::{DiffusionSpec, Source, TailModel};

/// Spans longer than this many cells are summed through cumulative tables.
const DIRECT_SPAN_CELLS: usize = 16;

#[derive(Debug)]
pub(crate) struct Tabulation {
    pub rule: Arc<GaussRule>,
    pub breaks: Vec<f64>,
    /// Scale density at Gauss nodes, `p` values per cell.
    pub scale_dens: Vec<f64>,
    pub speed_dens: Vec<f64>,
    pub cell_scale: Vec<f64>,
    pub cell_mass: Vec<f64>,
    /// `S(t_k)` with `S(x0) = 0`.
    pub scale_at: Vec<f64>,
    /// `m((-inf, t_k))`, atoms at `t_k` excluded.
    pub mass_left: Vec<f64>,
    /// `m((t_k, +inf))`, atoms at `t_k` excluded.
    pub mass_right: Vec<f64>,
    pub atom_at: Vec<f64>,
    pub tail_lo: f64,
    pub tail_hi: f64,
    pub tails_converged: (bool, bool),
    pub window_mass: f64,
    pub x0: f64,
}

/// Values inside one cell, relative to the value of `psi` at its left end.
struct CellLocal {
    dpsi: f64,
    scale_rel: Vec<f64>,
    speed_rel: Vec<f64>,
}

impl Tabulation {
    pub fn build(spec: &DiffusionSpec) -> Result<Self> {
        let tol = &spec.tolerances;
        let rule = Arc::new(GaussRule::new(tol.gauss_order));
        let (lo, hi) = (spec.window.lo, spec.window.hi);
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("invalid window [{lo}, {hi}]")));
        }
        if !(lo <= spec.x0 && spec.x0 <= hi) {
            return Err(Error::Config(format!(
                "reference point {} outside window [{lo}, {hi}]",
                spec.x0
            )));
        }

        let mut breaks: Vec<f64> = (0..=tol.cells)
            .map(|i| lo + (hi - lo) * i as f64 / tol.cells as f64)
            .collect();
        breaks.push(spec.x0);
        for &(pos, _) in &spec.atoms {
            if pos > lo && pos < hi {
                breaks.push(pos);
            }
        }
        if let Source::Tables { scale, speed_density } = &spec.source {
            check_table(scale, lo, hi, "scale_table")?;
            check_table(speed_density, lo, hi, "speed_table")?;
            for w in scale.windows(2) {
                if !(w[1].1 > w[0].1) {
                    return Err(Error::NonIncreasingScale { at: w[1].0 });
                }
            }
            for &(x, _) in scale.iter().chain(speed_density.iter()) {
                if x > lo && x < hi {
                    breaks.push(x);
                }
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let merge = 1e-12 * (hi - lo);
        breaks.dedup_by(|b, a| (*b - *a).abs() <= merge);
        // Keep the declared reference point and atoms exactly on a boundary.
        snap(&mut breaks, spec.x0, merge);
        for &(pos, _) in &spec.atoms {
            if pos > lo && pos < hi {
                snap(&mut breaks, pos, merge);
            }
        }

        let profiler = Profiler { spec, rule: &rule };
        let mut cells: Vec<(f64, f64, CellLocal)> = Vec::with_capacity(breaks.len());
        for w in breaks.windows(2) {
            profiler.refine(w[0], w[1], tol.max_refine, &mut cells)?;
        }

        let k = cells.len();
        let p = rule.order();
        let mut breaks = Vec::with_capacity(k + 1);
        breaks.push(cells[0].0);
        breaks.extend(cells.iter().map(|c| c.1));

        // psi at left ends, anchored at x0.
        let k0 = breaks
            .iter()
            .position(|&t| t == spec.x0)
            .ok_or_else(|| Error::Config("reference point lost during tabulation".into()))?;
        let mut psi_left = vec![0.0; k + 1];
        for i in k0..k {
            psi_left[i + 1] = psi_left[i] + cells[i].2.dpsi;
        }
        for i in (0..k0).rev() {
            psi_left[i] = psi_left[i + 1] - cells[i].2.dpsi;
        }

        let mut scale_dens = Vec::with_capacity(k * p);
        let mut speed_dens = Vec::with_capacity(k * p);
        let mut cell_scale = Vec::with_capacity(k);
        let mut cell_mass = Vec::with_capacity(k);
        for (i, (a, b, local)) in cells.iter().enumerate() {
            let half = 0.5 * (b - a);
            let fs = (-psi_left[i]).exp();
            let fm = psi_left[i].exp();
            let mut is = 0.0;
            let mut im = 0.0;
            for j in 0..p {
                let sd = fs * local.scale_rel[j];
                let md = fm * local.speed_rel[j];
                if !(sd > 0.0) || !sd.is_finite() {
                    return Err(Error::NonIncreasingScale {
                        at: a + half * (1.0 + rule.nodes[j]),
                    });
                }
                if !(md >= 0.0) || !md.is_finite() {
                    return Err(Error::Config(format!(
                        "speed density invalid ({md}) near x = {}",
                        a + half * (1.0 + rule.nodes[j])
                    )));
                }
                is += rule.weights[j] * sd;
                im += rule.weights[j] * md;
                scale_dens.push(sd);
                speed_dens.push(md);
            }
            cell_scale.push(half * is);
            cell_mass.push(half * im);
        }

        let mut scale_at = vec![0.0; k + 1];
        for i in k0..k {
            scale_at[i + 1] = scale_at[i] + cell_scale[i];
        }
        for i in (0..k0).rev() {
            scale_at[i] = scale_at[i + 1] - cell_scale[i];
        }

        let mut atom_at = vec![0.0; k + 1];
        let mut atoms_below = 0.0;
        let mut atoms_above = 0.0;
        for &(pos, mass) in &spec.atoms {
            if !(mass >= 0.0) {
                return Err(Error::Config(format!("negative atom mass {mass} at {pos}")));
            }
            if pos < lo {
                atoms_below += mass;
            } else if pos > hi {
                atoms_above += mass;
            } else {
                let idx = breaks
                    .iter()
                    .position(|&t| t == pos)
                    .ok_or_else(|| Error::Config(format!("atom at {pos} not on a cell boundary")))?;
                atom_at[idx] += mass;
            }
        }

        let (tail_lo, tail_hi, tails_converged) = match spec.tail {
            TailModel::Zero => (0.0, 0.0, (true, true)),
            TailModel::Probe => {
                let window_mass: f64 = cell_mass.iter().sum();
                let (l, lc) = profiler.probe_tail(lo, -1.0, psi_left[0], window_mass)?;
                let (r, rc) = profiler.probe_tail(hi, 1.0, psi_left[k], window_mass)?;
                (l, r, (lc, rc))
            }
        };
        let tail_lo = tail_lo + atoms_below;
        let tail_hi = tail_hi + atoms_above;

        let mut mass_left = vec![0.0; k + 1];
        mass_left[0] = tail_lo;
        for i in 0..k {
            mass_left[i + 1] = mass_left[i] + atom_at[i] + cell_mass[i];
        }
        let mut mass_right = vec![0.0; k + 1];
        mass_right[k] = tail_hi;
        for i in (0..k).rev() {
            mass_right[i] = mass_right[i + 1] + atom_at[i + 1] + cell_mass[i];
        }
        let window_mass = cell_mass.iter().sum::<f64>() + atom_at.iter().sum::<f64>();

        Ok(Tabulation {
            rule,
            breaks,
            scale_dens,
            speed_dens,
            cell_scale,
            cell_mass,
            scale_at,
            mass_left,
            mass_right,
            atom_at,
            tail_lo,
            tail_hi,
            tails_converged,
            window_mass,
            x0: spec.x0,
        })
    }

    pub fn cells(&self) -> usize {
        self.cell_mass.len()
    }

    pub fn lo(&self) -> f64 {
        self.breaks[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Cell containing `x` (clamped to the window) and its local coordinate.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let k = self.cells();
        let idx = self.breaks.partition_point(|&t| t <= x);
        let cell = idx.saturating_sub(1).min(k - 1);
        let (a, b) = (self.breaks[cell], self.breaks[cell + 1]);
        let s = (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0);
        (cell, s)
    }

    fn cell_slice<'a>(&self, data: &'a [f64], cell: usize) -> &'a [f64] {
        let p = self.rule.order();
        &data[cell * p..(cell + 1) * p]
    }

    fn half_width(&self, cell: usize) -> f64 {
        0.5 * (self.breaks[cell + 1] - self.breaks[cell])
    }

    /// Integral of a tabulated density over `[s0, s1]` inside one cell.
    fn segment(&self, data: &[f64], cell: usize, s0: f64, s1: f64) -> f64 {
        if s1 <= s0 {
            return 0.0;
        }
        let w = segment_weights(&self.rule, s0, s1);
        let vals = self.cell_slice(data, cell);
        self.half_width(cell) * w.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn scale_density(&self, x: f64) -> f64 {
        let (c, s) = self.locate(x);
        self.rule.interpolate(self.cell_slice(&self.scale_dens, c), s)
    }

    pub fn speed_density(&self, x: f64) -> f64 {
        let (c, s) = self.locate(x);
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        self.rule
            .interpolate(self.cell_slice(&self.speed_dens, c), s)
            .max(0.0)
    }

    pub fn scale(&self, x: f64) -> f64 {
        let (c, s) = self.locate(x);
        self.scale_at[c] + self.segment(&self.scale_dens, c, -1.0, s)
    }

    /// `S(hi) - S(lo)` summed locally when the points are close.
    pub fn scale_between(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return -self.scale_between(hi, lo);
        }
        let (c0, s0) = self.locate(lo);
        let (c1, s1) = self.locate(hi);
        if c0 == c1 {
            return self.segment(&self.scale_dens, c0, s0, s1);
        }
        if c1 - c0 > DIRECT_SPAN_CELLS {
            return self.scale(hi) - self.scale(lo);
        }
        let mut acc = self.segment(&self.scale_dens, c0, s0, 1.0);
        for c in c0 + 1..c1 {
            acc += self.cell_scale[c];
        }
        acc + self.segment(&self.scale_dens, c1, -1.0, s1)
    }

    /// Position where the scale function reaches `target` (clamped).
    pub fn scale_inverse(&self, target: f64) -> f64 {
        if target <= self.scale_at[0] {
            return self.lo();
        }
        if target >= *self.scale_at.last().unwrap() {
            return self.hi();
        }
        let idx = self.scale_at.partition_point(|&v| v <= target);
        let cell = idx.saturating_sub(1).min(self.cells() - 1);
        let (mut a, mut b) = (self.breaks[cell], self.breaks[cell + 1]);
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let f = self.scale(x) - target;
            if f == 0.0 {
                return x;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
            let newton = x - f / self.scale_density(x);
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if x == a || x == b {
                break;
            }
        }
        x
    }

    /// `m((-inf, x])`.
    pub fn mass_below(&self, x: f64) -> f64 {
        if x < self.lo() {
            return if x == f64::NEG_INFINITY { 0.0 } else { self.tail_lo };
        }
        if x >= self.hi() {
            return self.mass_left[self.cells()] + self.atom_at[self.cells()];
        }
        let (c, s) = self.locate(x);
        self.mass_left[c] + self.atom_at[c] + self.segment(&self.speed_dens, c, -1.0, s)
    }

    /// `m((-inf, x))`.
    pub fn mass_below_open(&self, x: f64) -> f64 {
        self.mass_below(x) - self.atom_exactly_at(x)
    }

    /// `m((x, +inf))`.
    pub fn mass_above(&self, x: f64) -> f64 {
        if x > self.hi() {
            return if x == f64::INFINITY { 0.0 } else { self.tail_hi };
        }
        if x <= self.lo() {
            return self.mass_right[0] + if x == self.lo() { 0.0 } else { self.atom_at[0] };
        }
        let (c, s) = self.locate(x);
        if s <= -1.0 && x == self.breaks[c] {
            return self.mass_right[c];
        }
        self.mass_right[c + 1] + self.atom_at[c + 1] + self.segment(&self.speed_dens, c, s, 1.0)
    }

    /// `m([x, +inf))`.
    pub fn mass_above_closed(&self, x: f64) -> f64 {
        self.mass_above(x) + self.atom_exactly_at(x)
    }

    pub fn atom_exactly_at(&self, x: f64) -> f64 {
        match self.breaks.binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(i) => self.atom_at[i],
            Err(_) => 0.0,
        }
    }

    /// `m((lo, hi])` with full relative precision. Mass outside the window is
    /// only counted for infinite endpoints.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut outside = 0.0;
        if lo == f64::NEG_INFINITY {
            outside += self.tail_lo;
        }
        if hi == f64::INFINITY {
            outside += self.tail_hi;
        }
        let a = lo.max(self.lo());
        let b = hi.min(self.hi());
        if b < a {
            return outside;
        }
        let lower_atom = if lo < self.lo() { self.atom_at[0] } else { 0.0 };
        let (c0, s0) = self.locate(a);
        let (c1, s1) = self.locate(b);
        if c1 - c0 > DIRECT_SPAN_CELLS {
            let via_right = self.mass_above(a) - self.mass_above(b);
            let via_left = self.mass_below(b) - self.mass_below(a);
            let inner = if self.mass_above(a) < self.mass_below(b) {
                via_right
            } else {
                via_left
            };
            return inner + lower_atom + outside;
        }
        let mut acc = if c0 == c1 {
            self.segment(&self.speed_dens, c0, s0, s1)
        } else {
            let mut acc = self.segment(&self.speed_dens, c0, s0, 1.0);
            for c in c0 + 1..c1 {
                acc += self.cell_mass[c];
            }
            acc + self.segment(&self.speed_dens, c1, -1.0, s1)
        };
        let first = self.breaks.partition_point(|&t| t <= a);
        let last = self.breaks.partition_point(|&t| t <= b);
        for i in first..last {
            acc += self.atom_at[i];
        }
        acc + lower_atom + outside
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_left[self.cells()] + self.atom_at[self.cells()] + self.tail_hi
    }

    /// Smallest `x` in the window with `m((-inf, x]) >= q * M`.
    pub fn mass_quantile(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.total_mass();
        let (mut a, mut b) = (self.lo(), self.hi());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.mass_below(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
            if b - a < 1e-14 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
        }
        b
    }
}

fn snap(breaks: &mut [f64], target: f64, merge: f64) {
    if let Some(v) = breaks.iter_mut().find(|v| (**v - target).abs() <= merge) {
        *v = target;
    }
}

fn check_table(table: &[(f64, f64)], lo: f64, hi: f64, name: &str) -> Result<()> {
    if table.len() < 2 {
        return Err(Error::Config(format!("{name} needs at least two rows")));
    }
    for w in table.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Config(format!("{name} x column must be strictly increasing")));
        }
    }
    if table[0].0 > lo || table[table.len() - 1].0 < hi {
        return Err(Error::Config(format!(
            "{name} covers [{}, {}] but the window is [{lo}, {hi}]",
            table[0].0,
            table[table.len() - 1].0
        )));
    }
    Ok(())
}

/// Weights for `∫_{s0}^{s1} ℓ_j(t) dt`.
pub(crate) fn segment_weights(rule: &GaussRule, s0: f64, s1: f64) -> Vec<f64> {
    let p = rule.order();
    let mut out = vec![0.0; p];
    let half = 0.5 * (s1 - s0);
    if half <= 0.0 {
        return out;
    }
    let mut ell = vec![0.0; p];
    for (q, &tq) in rule.nodes.iter().enumerate() {
        rule.basis(s0 + half * (tq + 1.0), &mut ell);
        let wq = half * rule.weights[q];
        for j in 0..p {
            out[j] += wq * ell[j];
        }
    }
    out
}

fn table_interp(table: &[(f64, f64)], x: f64) -> (f64, f64) {
    let idx = table.partition_point(|r| r.0 <= x).clamp(1, table.len() - 1);
    let (x0, y0) = table[idx - 1];
    let (x1, y1) = table[idx];
    let slope = (y1 - y0) / (x1 - x0);
    (y0 + slope * (x - x0), slope)
}

struct Profiler<'a> {
    spec: &'a DiffusionSpec,
    rule: &'a GaussRule,
}

impl Profiler<'_> {
    fn nodes(&self, lo: f64, hi: f64) -> Vec<f64> {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        self.rule.nodes.iter().map(|t| c + h * t).collect()
    }

    fn profile(&self, lo: f64, hi: f64) -> Result<CellLocal> {
        let ys = self.nodes(lo, hi);
        let half = 0.5 * (hi - lo);
        match &self.spec.source {
            Source::Sde { drift, sigma } => {
                let p = ys.len();
                let mut rate = Vec::with_capacity(p);
                let mut sig2 = Vec::with_capacity(p);
                for &y in &ys {
                    let s = sigma(y);
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Config(format!("sigma({y}) = {s} is not positive")));
                    }
                    let b = drift(y);
                    if !b.is_finite() {
                        return Err(Error::Config(format!("drift({y}) is not finite")));
                    }
                    sig2.push(s * s);
                    rate.push(2.0 * b / (s * s));
                }
                let mut scale_rel = Vec::with_capacity(p);
                let mut speed_rel = Vec::with_capacity(p);
                for (i, s2) in sig2.iter().enumerate() {
                    let row = self.rule.partial_row(i);
                    let dpsi: f64 = half * row.iter().zip(&rate).map(|(a, b)| a * b).sum::<f64>();
                    scale_rel.push((-dpsi).exp());
                    speed_rel.push(2.0 * dpsi.exp() / s2);
                }
                let dpsi =
                    half * self.rule.weights.iter().zip(&rate).map(|(a, b)| a * b).sum::<f64>();
                Ok(CellLocal {
                    dpsi,
                    scale_rel,
                    speed_rel,
                })
            }
            Source::Densities {
                scale_density,
                speed_density,
            } => Ok(CellLocal {
                dpsi: 0.0,
                scale_rel: ys.iter().map(|&y| scale_density(y)).collect(),
                speed_rel: ys.iter().map(|&y| speed_density(y)).collect(),
            }),
            Source::Tables {
                scale,
                speed_density,
            } => Ok(CellLocal {
                dpsi: 0.0,
                scale_rel: ys.iter().map(|&y| table_interp(scale, y).1).collect(),
                speed_rel: ys.iter().map(|&y| table_interp(speed_density, y).0).collect(),
            }),
        }
    }

    fn integrals(&self, lo: f64, hi: f64, c: &CellLocal) -> (f64, f64) {
        let half = 0.5 * (hi - lo);
        let w = &self.rule.weights;
        let s: f64 = w.iter().zip(&c.scale_rel).map(|(a, b)| a * b).sum();
        let m: f64 = w.iter().zip(&c.speed_rel).map(|(a, b)| a * b).sum();
        (half * s, half * m)
    }

    fn refine(
        &self,
        lo: f64,
        hi: f64,
        depth: usize,
        out: &mut Vec<(f64, f64, CellLocal)>,
    ) -> Result<()> {
        let whole = self.profile(lo, hi)?;
        if matches!(self.spec.source, Source::Tables { .. }) {
            out.push((lo, hi, whole));
            return Ok(());
        }
        let mid = 0.5 * (lo + hi);
        let left = self.profile(lo, mid)?;
        let right = self.profile(mid, hi)?;
        let (sw, mw) = self.integrals(lo, hi, &whole);
        let (sl, ml) = self.integrals(lo, mid, &left);
        let (sr, mr) = self.integrals(mid, hi, &right);
        let sh = sl + (-left.dpsi).exp() * sr;
        let mh = ml + left.dpsi.exp() * mr;
        let tol = self.spec.tolerances.quadrature_rel;
        let psi_ok = (whole.dpsi - left.dpsi - right.dpsi).abs() <= tol;
        let s_ok = (sw - sh).abs() <= tol * sh.abs();
        let m_ok = (mw - mh).abs() <= tol * mh.abs().max(1e-300);
        if psi_ok && s_ok && m_ok {
            out.push((lo, hi, whole));
            return Ok(());
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                detail: format!("cell refinement exhausted (scale err {:e}, mass err {:e})", (sw - sh).abs(), (mw - mh).abs()),
            });
        }
        self.refine(lo, mid, depth - 1, out)?;
        self.refine(mid, hi, depth - 1, out)
    }

    /// Marches outward from a window edge integrating the speed density.
    /// Returns the tail mass and whether the march converged.
    fn probe_tail(
        &self,
        edge: f64,
        direction: f64,
        psi_edge: f64,
        window_mass: f64,
    ) -> Result<(f64, bool)> {
        let width = (self.spec.window.hi - self.spec.window.lo) / 64.0;
        let cutoff = 1e-3 * self.spec.tolerances.tail_rel * window_mass;
        let mut psi = psi_edge;
        let mut acc = 0.0;
        let mut prev = f64::INFINITY;
        let mut decreasing = 0;
        for i in 0..256 {
            let a = edge + direction * width * i as f64;
            let b = a + direction * width;
            let (lo, hi) = if direction > 0.0 { (a, b) } else { (b, a) };
            let cell = match self.profile(lo, hi) {
                Ok(c) => c,
                Err(_) => return Ok((acc, false)),
            };
            let (_, m_rel) = self.integrals(lo, hi, &cell);
            // For the left tail the profile is anchored at `lo`, the far end.
            let mass = if direction > 0.0 {
                psi.exp() * m_rel
            } else {
                (psi - cell.dpsi).exp() * m_rel
            };
            psi += direction * cell.dpsi;
            if !mass.is_finite() {
                return Ok((f64::INFINITY, false));
            }
            acc += mass;
            if mass < prev {
                decreasing += 1;
            } else {
                decreasing = 0;
            }
            prev = mass;
            let negligible = mass <= 1e-6 * acc || mass <= cutoff;
            if mass == 0.0 || (negligible && decreasing >= 4) {
                return Ok((acc, true));
            }
        }
        Ok((acc, false))
    }
}
