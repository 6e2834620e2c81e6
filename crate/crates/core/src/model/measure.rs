use std::sync::Arc;

use super::Tabulation;

/// Scale function `S` with `S(x0) = 0`. Evaluation outside the window is
/// clamped to the nearest edge.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    tab: Arc<Tabulation>,
}

impl ScaleFunction {
    pub(crate) fn new(tab: Arc<Tabulation>) -> Self {
        ScaleFunction { tab }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.tab.scale(x)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.tab.scale_density(x)
    }

    /// `S(hi) - S(lo)` without cancellation between nearby points.
    pub fn between(&self, lo: f64, hi: f64) -> f64 {
        self.tab.scale_between(lo, hi)
    }

    pub fn inverse(&self, s: f64) -> f64 {
        self.tab.scale_inverse(s)
    }

    pub fn reference_point(&self) -> f64 {
        self.tab.x0
    }

    /// Cell boundaries and the cumulative values there.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tab.breaks.iter().copied().zip(self.tab.scale_at.iter().copied())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.tab.lo(), self.tab.hi())
    }
}

/// Speed measure: absolutely continuous part plus finitely many atoms.
#[derive(Debug, Clone)]
pub struct SpeedMeasure {
    tab: Arc<Tabulation>,
}

impl SpeedMeasure {
    pub(crate) fn new(tab: Arc<Tabulation>) -> Self {
        SpeedMeasure { tab }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.tab.speed_density(x)
    }

    /// `M(t) = m((-inf, t])`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.tab.mass_below(t)
    }

    /// `m((-inf, t))`.
    pub fn below_open(&self, t: f64) -> f64 {
        self.tab.mass_below_open(t)
    }

    /// `m((t, +inf))`, computed from the right.
    pub fn above(&self, t: f64) -> f64 {
        self.tab.mass_above(t)
    }

    /// `m([t, +inf))`.
    pub fn above_closed(&self, t: f64) -> f64 {
        self.tab.mass_above_closed(t)
    }

    /// `m((lo, hi])`.
    pub fn between(&self, lo: f64, hi: f64) -> f64 {
        self.tab.mass_between(lo, hi)
    }

    /// `m([lo, hi])`.
    pub fn closed(&self, lo: f64, hi: f64) -> f64 {
        self.tab.mass_between(lo, hi) + self.tab.atom_exactly_at(lo)
    }

    pub fn atom_at(&self, x: f64) -> f64 {
        self.tab.atom_exactly_at(x)
    }

    /// Atoms inside the window `(position, mass)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.tab
            .breaks
            .iter()
            .zip(&self.tab.atom_at)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&x, &m)| (x, m))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.tab.total_mass()
    }

    pub fn window_mass(&self) -> f64 {
        self.tab.window_mass
    }

    pub fn tail_masses(&self) -> (f64, f64) {
        (self.tab.tail_lo, self.tab.tail_hi)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.tab.mass_quantile(q)
    }
}
