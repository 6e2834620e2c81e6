//! Finite-volume discretization of `d/dm d/dS` and its smallest eigenvalues.
//!
//! Nodes `x_0 < ... < x_N` are equispaced in `x`. Node `i` owns the speed
//! mass `m_i` of the cell between the neighbouring midpoints, and the edge
//! `(i, i+1)` has conductance `c_{i+1/2} = 1 / (S(x_{i+1}) - S(x_i))`:
//!
//! ```text
//! (L f)_i = (c_{i+1/2} (f_{i+1} - f_i) - c_{i-1/2} (f_i - f_{i-1})) / m_i
//! ```
//!
//! For a diffusion given by SDE coefficients `c_{i+1/2} / m_i ≈ sigma^2 / (2 h^2)`,
//! so the symmetrized matrix `M^{1/2} (-L) M^{-1/2}` is not graded even when
//! `S` and `m` span many orders of magnitude across the window.

mod tridiag;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Diffusion, Side};
use crate::serde_float;

pub use tridiag::SymTridiagonal;

/// Default size for acceptance-grade runs.
pub const DEFAULT_GRID_SIZE: usize = 4000;
/// Largest eigenvalue count accepted by [`smallest_eigenvalues`].
pub const MAX_EIGENVALUES: usize = 6;
/// Residual tolerance relative to `max(1, ‖T‖)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Neumann => "neumann",
            Boundary::Dirichlet => "dirichlet",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neumann" | "n" => Ok(Boundary::Neumann),
            "dirichlet" | "d" => Ok(Boundary::Dirichlet),
            other => Err(Error::Config(format!("unknown boundary condition '{other}'"))),
        }
    }
}

/// Node set with cell masses and edge conductances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalGrid {
    pub nodes: Vec<f64>,
    pub masses: Vec<f64>,
    pub conductances: Vec<f64>,
}

impl NaturalGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Dirichlet energy `Σ c_{i+1/2} (f_{i+1} - f_i)^2`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.conductances
            .iter()
            .enumerate()
            .map(|(i, c)| c * (f[i + 1] - f[i]).powi(2))
            .sum()
    }

    /// Node index of `x`, if it is a node up to rounding.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let span = self.nodes[self.len() - 1] - self.nodes[0];
        let i = self.nodes.partition_point(|&t| t < x);
        [i.saturating_sub(1), i.min(self.len() - 1)]
            .into_iter()
            .find(|&j| (self.nodes[j] - x).abs() <= 1e-12 * span)
    }
}

/// `N + 1` nodes equispaced on the window.
pub fn build_grid(d: &Diffusion, n: usize) -> Result<NaturalGrid> {
    let w = d.window();
    build_grid_on(d, w.lo, w.hi, n)
}

/// `N + 1` nodes equispaced on `[lo, hi]`. End cells receive the speed mass
/// beyond `[lo, hi]`, so the masses add up to `m(R)`.
pub fn build_grid_on(d: &Diffusion, lo: f64, hi: f64, n: usize) -> Result<NaturalGrid> {
    if n < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 intervals, got {n}")));
    }
    let w = d.window();
    if !(w.lo <= lo && lo < hi && hi <= w.hi) {
        return Err(Error::Domain(format!("[{lo}, {hi}] not inside the window")));
    }
    let h = (hi - lo) / n as f64;
    let nodes: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + h * i as f64 })
        .collect();
    let speed = d.speed();
    let scale = d.scale();
    let mut masses = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let left = if i == 0 { f64::NEG_INFINITY } else { 0.5 * (nodes[i - 1] + nodes[i]) };
        let right = if i == n { f64::INFINITY } else { 0.5 * (nodes[i] + nodes[i + 1]) };
        let m = match (i == 0, i == n) {
            (true, _) => speed.below_open(lo) + speed.closed(lo, right),
            (_, true) => speed.between(left, hi) + speed.above(hi),
            _ => speed.between(left, right),
        };
        masses.push(m);
    }
    let conductances: Vec<f64> = nodes.windows(2).map(|p| 1.0 / scale.between(p[0], p[1])).collect();
    for (i, &m) in masses.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::QuadratureFailure {
                lo: nodes[i.saturating_sub(1)],
                hi: nodes[(i + 1).min(n)],
                detail: format!("cell mass {m} is not positive"),
            });
        }
    }
    if conductances.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
        return Err(Error::QuadratureFailure {
            lo,
            hi,
            detail: "scale increment not positive on a grid edge".into(),
        });
    }
    Ok(NaturalGrid {
        nodes,
        masses,
        conductances,
    })
}

/// `-L` with boundary conditions, as the unknown range and its m-symmetric
/// tridiagonal form.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: NaturalGrid,
    pub bc: (Boundary, Boundary),
    /// Grid indices of the unknowns.
    pub first: usize,
    pub last: usize,
}

pub fn build_operator(grid: NaturalGrid, bc: (Boundary, Boundary)) -> DiscreteOperator {
    let n = grid.len() - 1;
    let first = if bc.0 == Boundary::Dirichlet { 1 } else { 0 };
    let last = if bc.1 == Boundary::Dirichlet { n - 1 } else { n };
    DiscreteOperator {
        grid,
        bc,
        first,
        last,
    }
}

impl DiscreteOperator {
    pub fn unknowns(&self) -> usize {
        self.last + 1 - self.first
    }

    /// Flux coefficients of unknown `i`: `(c_{i-1/2}, c_{i+1/2})`, zero for a
    /// Neumann exterior.
    fn fluxes(&self, i: usize) -> (f64, f64) {
        let c = &self.grid.conductances;
        let left = if i > 0 { c[i - 1] } else { 0.0 };
        let right = if i < c.len() { c[i] } else { 0.0 };
        (left, right)
    }

    /// `(-L f)` on the unknowns; `f` is given on the full grid and Dirichlet
    /// ends are read as zero.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let g = |i: usize| {
            if i < self.first || i > self.last {
                0.0
            } else {
                f[i]
            }
        };
        (self.first..=self.last)
            .map(|i| {
                let (cl, cr) = self.fluxes(i);
                let mut acc = 0.0;
                if cl > 0.0 {
                    acc += cl * (g(i) - g(i - 1));
                }
                if cr > 0.0 {
                    acc += cr * (g(i) - g(i + 1));
                }
                acc / self.grid.masses[i]
            })
            .collect()
    }

    /// Matrix entry `(-L)_{ij}` on grid indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (cl, cr) = self.fluxes(i);
        let m = self.grid.masses[i];
        if i == j {
            (cl + cr) / m
        } else if j + 1 == i {
            -cl / m
        } else if j == i + 1 {
            -cr / m
        } else {
            0.0
        }
    }

    pub fn symmetrized(&self) -> SymTridiagonal {
        let m = &self.grid.masses;
        let diag = (self.first..=self.last)
            .map(|i| {
                let (cl, cr) = self.fluxes(i);
                (cl + cr) / m[i]
            })
            .collect();
        let off = (self.first..self.last)
            .map(|i| -self.grid.conductances[i] / (m[i] * m[i + 1]).sqrt())
            .collect();
        SymTridiagonal { diag, off }
    }

    /// Full-grid function from values on the unknowns.
    pub fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.grid.len()];
        f[self.first..=self.last].copy_from_slice(v);
        f
    }
}

/// What an eigenvalue computation describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectrumKind {
    /// Whole window, Neumann at both ends; the gap is the second eigenvalue.
    Full,
    /// Killed at `a`; the gap is the smallest eigenvalue.
    Killed { a: f64, side: Side },
    /// Operator with user-chosen boundary conditions on `[lo, hi]`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub kind: SpectrumKind,
    #[serde(with = "serde_float::vec")]
    pub eigenvalues: Vec<f64>,
    #[serde(with = "serde_float::vec")]
    pub residuals: Vec<f64>,
    pub grid_size: usize,
    pub domain: (f64, f64),
    pub bc: (Boundary, Boundary),
    /// `γ` for [`SpectrumKind::Full`], `γ_a^±` for [`SpectrumKind::Killed`],
    /// the smallest eigenvalue otherwise.
    #[serde(with = "serde_float")]
    pub gap: f64,
    /// Eigenvectors on the full grid, normalized in `L^2(m)`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub nodes: Vec<f64>,
}

impl SpectrumResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The `k` smallest eigenvalues of `-L`, ascending, with eigenvectors.
pub fn smallest_eigenvalues(op: &DiscreteOperator, k: usize) -> Result<SpectrumResult> {
    if k == 0 || k > MAX_EIGENVALUES {
        return Err(Error::Domain(format!("between 1 and {MAX_EIGENVALUES} eigenvalues, got {k}")));
    }
    if k > op.unknowns() {
        return Err(Error::Domain(format!("{k} eigenvalues requested from {} unknowns", op.unknowns())));
    }
    let t = op.symmetrized();
    let norm = t.norm_inf().max(1.0);
    let tol = RESIDUAL_TOL * norm;
    let mut eigenvalues = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = t.eigenvalue(j, 1e-12);
        let (v, r) = t.eigenvector(lambda, 3);
        if !(r <= tol) {
            return Err(Error::ConvergenceFailure(format!(
                "eigenvalue {j} = {lambda}: residual {r:e} above {tol:e}"
            )));
        }
        // back to f = M^{-1/2} v, unit in L^2(m)
        let f: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| x / op.grid.masses[op.first + i].sqrt())
            .collect();
        eigenvalues.push(lambda);
        residuals.push(r);
        vectors.push(op.extend(&f));
    }
    let gap = eigenvalues[0];
    Ok(SpectrumResult {
        kind: SpectrumKind::Custom,
        eigenvalues,
        residuals,
        grid_size: op.grid.len() - 1,
        domain: (op.grid.nodes[0], op.grid.nodes[op.grid.len() - 1]),
        bc: op.bc,
        gap,
        eigenvectors: vectors,
        nodes: op.grid.nodes.clone(),
    })
}

/// `γ`: second Neumann eigenvalue on the window.
pub fn full_gap(d: &Diffusion, n: usize, k: usize) -> Result<SpectrumResult> {
    d.require_certificate()?;
    let op = build_operator(build_grid(d, n)?, (Boundary::Neumann, Boundary::Neumann));
    let mut r = smallest_eigenvalues(&op, k.max(2))?;
    r.kind = SpectrumKind::Full;
    r.gap = r.eigenvalues[1];
    Ok(r)
}

/// `γ_a^±`: Dirichlet at `a`, Neumann at the far window edge.
pub fn killed_gap(d: &Diffusion, a: f64, side: Side, n: usize) -> Result<SpectrumResult> {
    killed_spectrum(d, a, side, n, 1)
}

pub fn killed_spectrum(d: &Diffusion, a: f64, side: Side, n: usize, k: usize) -> Result<SpectrumResult> {
    d.require_certificate()?;
    let w = d.window();
    if !(w.lo < a && a < w.hi) {
        return Err(Error::Domain(format!("anchor {a} not inside the window")));
    }
    let (grid, bc) = match side {
        Side::Plus => (build_grid_on(d, a, w.hi, n)?, (Boundary::Dirichlet, Boundary::Neumann)),
        Side::Minus => (build_grid_on(d, w.lo, a, n)?, (Boundary::Neumann, Boundary::Dirichlet)),
    };
    // The killed point carries no mass: its cell is not an unknown.
    let op = build_operator(grid, bc);
    let mut r = smallest_eigenvalues(&op, k)?;
    r.kind = SpectrumKind::Killed { a, side };
    Ok(r)
}

/// Killed gaps for several anchors and both sides, computed concurrently.
pub fn killed_gaps(d: &Diffusion, anchors: &[f64], n: usize) -> Result<Vec<(SpectrumResult, SpectrumResult)>> {
    anchors
        .par_iter()
        .map(|&a| Ok((killed_gap(d, a, Side::Plus, n)?, killed_gap(d, a, Side::Minus, n)?)))
        .collect()
}

/// Relative change of the gap when the grid is refined from `n` to `2n`.
pub fn refinement_change<F>(n: usize, gap: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let (coarse, fine) = rayon::join(|| gap(n), || gap(2 * n));
    let (coarse, fine) = (coarse?, fine?);
    Ok((coarse - fine).abs() / fine.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariationalMode {
    Poincare,
    Hardy { a: f64, side: Side },
}

/// Rayleigh-type quotients on the grid: m-variance over energy (Poincaré) or
/// `Σ_{side} m_i (F_i - F(a))^2` over the half-line energy (Hardy). `a` must
/// be a node.
pub fn variational_check(grid: &NaturalGrid, f: &[f64], mode: VariationalMode) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::Domain("function length does not match the grid".into()));
    }
    match mode {
        VariationalMode::Poincare => {
            let total = grid.total_mass();
            let mean = grid.masses.iter().zip(f).map(|(m, v)| m * v).sum::<f64>() / total;
            let var: f64 = grid.masses.iter().zip(f).map(|(m, v)| m * (v - mean).powi(2)).sum();
            let energy = grid.energy(f);
            if !(energy > 0.0) {
                return Err(Error::DegenerateFunction);
            }
            Ok(var / energy)
        }
        VariationalMode::Hardy { a, side } => {
            let ia = grid
                .node_index(a)
                .ok_or_else(|| Error::Domain(format!("{a} is not a grid node")))?;
            let fa = f[ia];
            let range = match side {
                Side::Plus => ia..grid.len(),
                Side::Minus => 0..ia + 1,
            };
            let edges = match side {
                Side::Plus => ia..grid.len() - 1,
                Side::Minus => 0..ia,
            };
            let norm: f64 = range
                .filter(|&i| i != ia)
                .map(|i| grid.masses[i] * (f[i] - fa).powi(2))
                .sum();
            let energy: f64 = edges
                .map(|i| grid.conductances[i] * (f[i + 1] - f[i]).powi(2))
                .sum();
            if !(energy > 0.0) {
                return Err(Error::DegenerateFunction);
            }
            Ok(norm / energy)
        }
    }
}

#[cfg(test)]
mod tests;
