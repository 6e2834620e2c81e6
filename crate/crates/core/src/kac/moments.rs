use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Diffusion, Side};
use crate::serde_float;

use super::{Interval, Operator, PanelFunction, PanelSpace};

/// Default recursion depth.
pub const DEFAULT_DEPTH: usize = 40;
/// Relative spread allowed over the last [`STABLE_WINDOW`] extrapolated ratios.
pub const STABILIZATION_TOL: f64 = 5e-3;
pub const STABLE_WINDOW: usize = 5;

/// Normalized moments `μ_n(x) = E_x T^n / n!` on a grid.
///
/// Rows are stored rescaled: `μ_n(x_i) = rows[n][i] * exp(log_scale[n])`, so
/// deep rows of fast-decaying sequences do not underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub target: Interval,
    pub grid: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub log_scale: Vec<f64>,
    /// Mass the truncated open end contributed, relative to the row maximum,
    /// summed over rows.
    #[serde(with = "serde_float")]
    pub tail_error: f64,
}

impl MomentTable {
    pub fn depth(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn mu(&self, n: usize, i: usize) -> f64 {
        self.rows[n][i] * self.log_scale[n].exp()
    }

    pub fn ln_mu(&self, n: usize, i: usize) -> f64 {
        self.rows[n][i].ln() + self.log_scale[n]
    }

    /// `E_x T^n` at grid point `i` (may overflow for large `n`).
    pub fn raw_moment(&self, n: usize, i: usize) -> f64 {
        let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        (self.ln_mu(n, i) + ln_fact).exp()
    }

    /// `μ_n(x_i) / μ_{n+1}(x_i)` for `n = 0..depth`.
    pub fn ratios(&self, i: usize) -> Vec<f64> {
        (0..self.depth())
            .map(|n| {
                self.rows[n][i] / self.rows[n + 1][i]
                    * (self.log_scale[n] - self.log_scale[n + 1]).exp()
            })
            .collect()
    }

    /// CSV with columns `x, n, mu_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "n", "mu_n"])?;
        for n in 0..=self.depth() {
            for (i, x) in self.grid.iter().enumerate() {
                w.write_record([format!("{x:e}"), n.to_string(), format!("{:e}", self.mu(n, i))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn recursion(space: &PanelSpace, depth: usize) -> Result<MomentTable> {
    let mut f = space.constant(1.0);
    let mut rows = vec![f.grid.clone()];
    let mut log_scale = vec![0.0];
    let mut ls = 0.0;
    let mut tail_error = 0.0;
    for _ in 0..depth {
        let g = space.apply(Operator::G, &f)?;
        let s = g.nodes.iter().chain(&g.grid).fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(s > 0.0) {
            return Err(Error::QuadratureFailure {
                lo: f64::NAN,
                hi: f64::NAN,
                detail: "moment row vanished".into(),
            });
        }
        let fmax = f.nodes.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        tail_error += space.tail_mass() * fmax / s;
        ls += s.ln();
        rows.push(g.grid.iter().map(|v| v / s).collect());
        log_scale.push(ls);
        f = PanelFunction {
            nodes: g.nodes.iter().map(|v| v / s).collect(),
            grid: g.grid.iter().map(|v| v / s).collect(),
        };
    }
    Ok(MomentTable {
        target: space.interval,
        grid: space.grid().to_vec(),
        rows,
        log_scale,
        tail_error,
    })
}

/// Moments of the exit time `T_{a,b}` via `μ_n = G μ_{n-1}` on `(a, b)`.
pub fn exit_moments(d: &Diffusion, a: f64, b: f64, grid: &[f64], depth: usize) -> Result<MomentTable> {
    let space = PanelSpace::new(d, Interval::Bounded { a, b }, grid)?;
    recursion(&space, depth)
}

/// Moments of the hitting time `T_a` from the `side` half-line of `a`.
pub fn hitting_moments(
    d: &Diffusion,
    a: f64,
    side: Side,
    grid: &[f64],
    depth: usize,
) -> Result<MomentTable> {
    d.require_certificate()?;
    check_side(a, side, grid)?;
    let space = PanelSpace::new(d, Interval::HalfLine { a, side }, grid)?;
    recursion(&space, depth)
}

fn check_side(a: f64, side: Side, grid: &[f64]) -> Result<()> {
    for &x in grid {
        let ok = match side {
            Side::Plus => x > a,
            Side::Minus => x < a,
        };
        if !ok {
            return Err(Error::Domain(format!("grid point {x} not strictly on the {side} side of {a}")));
        }
    }
    Ok(())
}

/// Ratio diagnostics at one starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub x: f64,
    #[serde(with = "serde_float")]
    pub estimate: f64,
    #[serde(with = "serde_float::vec")]
    pub ratios: Vec<f64>,
    #[serde(with = "serde_float::vec")]
    pub extrapolated: Vec<f64>,
    /// Relative spread of the last extrapolated ratios.
    #[serde(with = "serde_float")]
    pub spread: f64,
    pub stabilized: bool,
}

/// Estimate of `λ_a^± = sup{λ : E_x e^{λ T_a} < ∞}` as the radius of
/// convergence of `Σ λ^n μ_n(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub a: f64,
    pub side: Side,
    #[serde(with = "serde_float")]
    pub estimate: f64,
    pub depth: usize,
    pub stabilized: bool,
    /// Largest spread over the starting points.
    #[serde(with = "serde_float")]
    pub residual: f64,
    /// Largest relative deviation of a per-point estimate from `estimate`.
    #[serde(with = "serde_float")]
    pub disagreement: f64,
    /// Whether all starting points agree within the stabilization tolerance.
    pub consistent: bool,
    pub points: Vec<PointEstimate>,
}

impl LambdaEstimate {
    /// Turns an unstabilized estimate into [`Error::NotStabilized`].
    pub fn require_stable(self) -> Result<Self> {
        if self.stabilized {
            Ok(self)
        } else {
            Err(Error::NotStabilized {
                estimate: self.estimate,
                spread: self.residual,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Aitken's Δ² transform; falls back to the raw term when the second
/// difference vanishes.
pub fn aitken(seq: &[f64]) -> Vec<f64> {
    seq.windows(3)
        .map(|w| {
            let d2 = w[2] - 2.0 * w[1] + w[0];
            let v = w[2] - (w[2] - w[1]).powi(2) / d2;
            if d2.abs() <= 1e-13 * w[2].abs() || !v.is_finite() {
                w[2]
            } else {
                v
            }
        })
        .collect()
}

fn relative_spread(tail: &[f64]) -> f64 {
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    (max - min) / mean.abs()
}

/// Per-point ratio analysis of a moment table.
pub fn analyze_ratios(table: &MomentTable) -> Vec<PointEstimate> {
    (0..table.grid.len())
        .map(|i| {
            let ratios = table.ratios(i);
            let extrapolated = aitken(&ratios[1.min(ratios.len())..]);
            let (estimate, spread) = if extrapolated.len() >= STABLE_WINDOW {
                let tail = &extrapolated[extrapolated.len() - STABLE_WINDOW..];
                (*tail.last().unwrap(), relative_spread(tail))
            } else {
                (ratios.last().copied().unwrap_or(f64::NAN), f64::INFINITY)
            };
            PointEstimate {
                x: table.grid[i],
                estimate,
                ratios,
                extrapolated,
                spread,
                stabilized: spread < STABILIZATION_TOL,
            }
        })
        .collect()
}

/// Ratio-test estimate of `λ_a^±` from the starting points in `grid`.
pub fn estimate_lambda(
    d: &Diffusion,
    a: f64,
    side: Side,
    grid: &[f64],
    depth: usize,
) -> Result<LambdaEstimate> {
    if grid.is_empty() {
        return Err(Error::Domain("at least one starting point is required".into()));
    }
    if depth < STABLE_WINDOW + 3 {
        return Err(Error::Domain(format!("depth {depth} too small for the ratio test")));
    }
    let table = hitting_moments(d, a, side, grid, depth)?;
    let points = analyze_ratios(&table);
    let mut sorted: Vec<f64> = points.iter().map(|p| p.estimate).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let estimate = sorted[sorted.len() / 2].max(0.0);
    let residual = points.iter().map(|p| p.spread).fold(0.0, f64::max);
    let disagreement = points
        .iter()
        .map(|p| (p.estimate - estimate).abs() / estimate)
        .fold(0.0, f64::max);
    Ok(LambdaEstimate {
        a,
        side,
        estimate,
        depth,
        stabilized: points.iter().all(|p| p.stabilized),
        residual,
        disagreement,
        consistent: disagreement <= STABILIZATION_TOL,
        points,
    })
}
