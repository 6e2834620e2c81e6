//! Scale function and speed measure of a regular one-dimensional diffusion.
//!
//! Normalization: for `dX = b(X) dt + sigma(X) dW`
//!
//! ```text
//! S'(x) = exp(-∫_{x0}^{x} 2 b / sigma^2),    m'(x) = 2 / (sigma^2(x) S'(x))
//! ```
//!
//! so the generator `(sigma^2/2) f'' + b f'` equals `d/dm d/dS`. With this
//! choice Brownian motion (`S = x`, `m = 2 dx`) has `E_x T_{0,1} = x (1 - x)`.

mod certificate;
mod measure;
mod tabulation;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

pub use certificate::{certify_recurrence, RecurrenceCertificate};
pub use measure::{ScaleFunction, SpeedMeasure};

pub(crate) use tabulation::Tabulation;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which half-line of an anchor point `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" | "upper" => Ok(Side::Plus),
            "minus" | "-" | "lower" => Ok(Side::Minus),
            other => Err(Error::Config(format!("unknown side '{other}' (use plus|minus)"))),
        }
    }
}

#[derive(Clone)]
pub enum Source {
    Sde { drift: RealFn, sigma: RealFn },
    Densities { scale_density: RealFn, speed_density: RealFn },
    /// Piecewise linear `S` and piecewise linear speed density, rows `(x, value)`.
    Tables {
        scale: Vec<(f64, f64)>,
        speed_density: Vec<(f64, f64)>,
    },
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Sde { .. } => f.write_str("Sde"),
            Source::Densities { .. } => f.write_str("Densities"),
            Source::Tables { scale, speed_density } => f
                .debug_struct("Tables")
                .field("scale_rows", &scale.len())
                .field("speed_rows", &speed_density.len())
                .finish(),
        }
    }
}

/// How speed mass outside the truncation window is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailModel {
    /// Integrate the density outward from each edge until it is negligible.
    Probe,
    /// Declare no mass outside the window (tabulated or surrogate measures).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Window { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelTolerances {
    /// Relative tolerance of the per-cell quadrature refinement.
    pub quadrature_rel: f64,
    /// Admissible speed mass outside the window, relative to the total.
    pub tail_rel: f64,
    /// `|S(edge)|` must exceed this multiple of the typical scale span.
    pub divergence_factor: f64,
    /// Initial number of uniform cells over the window.
    pub cells: usize,
    pub gauss_order: usize,
    pub max_refine: usize,
}

impl Default for ModelTolerances {
    fn default() -> Self {
        ModelTolerances {
            quadrature_rel: 1e-9,
            tail_rel: 1e-10,
            divergence_factor: 1e6,
            cells: 1024,
            gauss_order: 10,
            max_refine: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub source: Source,
    pub x0: f64,
    pub window: Window,
    /// Finite speed atoms `(position, mass)`.
    pub atoms: Vec<(f64, f64)>,
    pub tail: TailModel,
    pub tolerances: ModelTolerances,
}

impl DiffusionSpec {
    pub fn sde(drift: RealFn, sigma: RealFn, window: Window) -> Self {
        DiffusionSpec {
            source: Source::Sde { drift, sigma },
            x0: 0.0,
            window,
            atoms: Vec::new(),
            tail: TailModel::Probe,
            tolerances: ModelTolerances::default(),
        }
    }

    pub fn from_expressions(drift: &str, sigma: &str, window: Window) -> Result<Self> {
        let b = Expr::parse(drift)?;
        let s = Expr::parse(sigma)?;
        Ok(Self::sde(
            Arc::new(move |x| b.eval(x)),
            Arc::new(move |x| s.eval(x)),
            window,
        ))
    }

    /// Directly specified densities `S'` and `m'`; no tail mass by default.
    pub fn densities(scale_density: RealFn, speed_density: RealFn, window: Window) -> Self {
        DiffusionSpec {
            source: Source::Densities {
                scale_density,
                speed_density,
            },
            x0: window.lo.max(0.0).min(window.hi),
            window,
            atoms: Vec::new(),
            tail: TailModel::Zero,
            tolerances: ModelTolerances::default(),
        }
    }

    pub fn tables(scale: Vec<(f64, f64)>, speed_density: Vec<(f64, f64)>, window: Window) -> Self {
        DiffusionSpec {
            source: Source::Tables {
                scale,
                speed_density,
            },
            x0: window.lo.max(0.0).min(window.hi),
            window,
            atoms: Vec::new(),
            tail: TailModel::Zero,
            tolerances: ModelTolerances::default(),
        }
    }

    pub fn from_csv_tables(scale_path: &Path, speed_path: &Path, window: Window) -> Result<Self> {
        Ok(Self::tables(
            read_xy_csv(scale_path)?,
            read_xy_csv(speed_path)?,
            window,
        ))
    }

    /// `dX = -theta X dt + sqrt(2) dW`, speed density `exp(-theta x^2 / 2)`.
    pub fn ornstein_uhlenbeck(theta: f64, window: Window) -> Self {
        Self::sde(
            Arc::new(move |x| -theta * x),
            Arc::new(|_| std::f64::consts::SQRT_2),
            window,
        )
    }

    /// `dX = (x - x^3) dt + sqrt(2) dW`.
    pub fn double_well(window: Window) -> Self {
        Self::sde(
            Arc::new(|x| x - x * x * x),
            Arc::new(|_| std::f64::consts::SQRT_2),
            window,
        )
    }

    /// Brownian motion with `S = x`, `m = 2 dx` restricted to the window.
    pub fn brownian_surrogate(window: Window) -> Self {
        Self::densities(Arc::new(|_| 1.0), Arc::new(|_| 2.0), window)
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_atoms(mut self, atoms: Vec<(f64, f64)>) -> Self {
        self.atoms = atoms;
        self
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    pub fn with_tolerances(mut self, tolerances: ModelTolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    /// SDE coefficients, when the spec was given in that form.
    pub fn coefficients(&self) -> Option<(RealFn, RealFn)> {
        match &self.source {
            Source::Sde { drift, sigma } => Some((drift.clone(), sigma.clone())),
            _ => None,
        }
    }
}

fn read_xy_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Config(format!("{}: missing column {i}", path.display())))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        rows.push((parse(0)?, parse(1)?));
    }
    Ok(rows)
}

pub fn build_scale(spec: &DiffusionSpec) -> Result<ScaleFunction> {
    let tab = Arc::new(Tabulation::build(&spec.clone().with_tail(TailModel::Zero))?);
    Ok(ScaleFunction::new(tab))
}

pub fn build_speed(spec: &DiffusionSpec) -> Result<SpeedMeasure> {
    let tab = Arc::new(Tabulation::build(spec)?);
    check_finite_mass(&tab)?;
    Ok(SpeedMeasure::new(tab))
}

fn check_finite_mass(tab: &Tabulation) -> Result<()> {
    if !tab.tails_converged.0 || !tab.tail_lo.is_finite() {
        return Err(Error::InfiniteMass { side: "lower" });
    }
    if !tab.tails_converged.1 || !tab.tail_hi.is_finite() {
        return Err(Error::InfiniteMass { side: "upper" });
    }
    Ok(())
}

/// A built diffusion: scale function, speed measure and recurrence
/// certificate over a common tabulation. Immutable and `Sync`.
#[derive(Debug, Clone)]
pub struct Diffusion {
    spec: DiffusionSpec,
    tab: Arc<Tabulation>,
    scale: ScaleFunction,
    speed: SpeedMeasure,
    certificate: RecurrenceCertificate,
}

impl Diffusion {
    pub fn new(spec: DiffusionSpec) -> Result<Self> {
        let tab = Arc::new(Tabulation::build(&spec)?);
        check_finite_mass(&tab)?;
        let certificate = RecurrenceCertificate::from_tabulation(&tab, &spec);
        Ok(Diffusion {
            scale: ScaleFunction::new(tab.clone()),
            speed: SpeedMeasure::new(tab.clone()),
            tab,
            spec,
            certificate,
        })
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn scale(&self) -> &ScaleFunction {
        &self.scale
    }

    pub fn speed(&self) -> &SpeedMeasure {
        &self.speed
    }

    pub fn window(&self) -> Window {
        self.spec.window
    }

    pub fn certificate(&self) -> &RecurrenceCertificate {
        &self.certificate
    }

    pub fn require_certificate(&self) -> Result<()> {
        if self.certificate.passes() {
            Ok(())
        } else {
            Err(Error::CertificateRequired(self.certificate.summary()))
        }
    }

    /// Rebuilds on a window enlarged by `factor` around its centre.
    pub fn widened(&self, factor: f64) -> Result<Self> {
        if matches!(self.spec.source, Source::Tables { .. }) {
            return Err(Error::Config("tabulated specs cannot be widened".into()));
        }
        let w = self.spec.window;
        let c = 0.5 * (w.lo + w.hi);
        let h = 0.5 * w.width() * factor;
        let mut tol = self.spec.tolerances;
        tol.cells = ((tol.cells as f64) * factor).ceil() as usize;
        Diffusion::new(
            self.spec
                .clone()
                .with_window(Window::new(c - h, c + h))
                .with_tolerances(tol),
        )
    }

    pub(crate) fn tabulation(&self) -> &Tabulation {
        &self.tab
    }

    /// Breakpoints of the internal cells; downstream panels align with them.
    pub fn cell_breaks(&self) -> &[f64] {
        &self.tab.breaks
    }
}
