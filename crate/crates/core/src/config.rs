//! TOML run configuration.
//!
//! ```toml
//! [diffusion]
//! drift = "-x"
//! sigma = "sqrt(2)"
//! x0 = 0.0
//! atoms = [[0.5, 0.1]]
//!
//! [window]
//! lo = -8.0
//! hi = 8.0
//!
//! [anchors]
//! points = [-1.0, 0.0, 1.0]
//!
//! [simulation]
//! paths = 10000
//! seed = 7
//! ```
//!
//! `scale_table` and `speed_table` (CSV, columns `x,value`) replace `drift`
//! and `sigma`; relative paths are resolved against the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constants::{AnalysisOptions, ReportTolerances};
use crate::error::{Error, Result};
use crate::kac::DEFAULT_DEPTH;
use crate::model::{Diffusion, DiffusionSpec, ModelTolerances, Side, Window};
use crate::montecarlo::SimConfig;
use crate::spectral::DEFAULT_GRID_SIZE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub diffusion: DiffusionSection,
    pub window: Window,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub anchors: AnchorSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    /// Directory that relative table paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub drift: Option<String>,
    pub sigma: Option<String>,
    pub scale_table: Option<PathBuf>,
    pub speed_table: Option<PathBuf>,
    pub x0: Option<f64>,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub quadrature_rel: f64,
    pub tail_rel: f64,
    pub divergence_factor: f64,
    pub cells: usize,
    pub bracket_rel: f64,
    pub khasminskii_rel: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let m = ModelTolerances::default();
        let r = ReportTolerances::default();
        ToleranceSection {
            quadrature_rel: m.quadrature_rel,
            tail_rel: m.tail_rel,
            divergence_factor: m.divergence_factor,
            cells: m.cells,
            bracket_rel: r.bracket_rel,
            khasminskii_rel: r.khasminskii_rel,
        }
    }
}

impl ToleranceSection {
    pub fn model(&self) -> ModelTolerances {
        ModelTolerances {
            quadrature_rel: self.quadrature_rel,
            tail_rel: self.tail_rel,
            divergence_factor: self.divergence_factor,
            cells: self.cells,
            ..ModelTolerances::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorSection {
    pub points: Option<Vec<f64>>,
    /// Speed-measure quantiles, used when `points` is absent.
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub paths: usize,
    pub seed: u64,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub step: f64,
    pub t_max: f64,
    pub bridge: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            paths: 10_000,
            seed: 0,
            from: None,
            to: None,
            step: 1e-3,
            t_max: 100.0,
            bridge: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    /// Nodes of the spectral discretization.
    pub grid_size: usize,
    /// Number of moment iterations.
    pub depth: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            grid_size: DEFAULT_GRID_SIZE,
            depth: DEFAULT_DEPTH,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let w = self.window;
        if !(w.lo < w.hi) || !w.lo.is_finite() || !w.hi.is_finite() {
            return Err(Error::Config(format!("window [{}, {}] is empty", w.lo, w.hi)));
        }
        let d = &self.diffusion;
        let sde = d.drift.is_some() || d.sigma.is_some();
        let tables = d.scale_table.is_some() || d.speed_table.is_some();
        match (sde, tables) {
            (true, true) => {
                return Err(Error::Config("give either drift/sigma or scale_table/speed_table".into()))
            }
            (false, false) => return Err(Error::Config("[diffusion] needs drift and sigma".into())),
            (true, false) if d.drift.is_none() || d.sigma.is_none() => {
                return Err(Error::Config("both drift and sigma are required".into()))
            }
            (false, true) if d.scale_table.is_none() || d.speed_table.is_none() => {
                return Err(Error::Config("both scale_table and speed_table are required".into()))
            }
            _ => {}
        }
        if let Some(q) = &self.anchors.quantiles {
            if q.iter().any(|q| !(0.0 < *q && *q < 1.0)) {
                return Err(Error::Config("anchor quantiles must lie in (0, 1)".into()));
            }
        }
        if self.numerics.grid_size < 3 {
            return Err(Error::Config("grid_size must be at least 3".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<DiffusionSpec> {
        let d = &self.diffusion;
        let spec = match (&d.drift, &d.sigma, &d.scale_table, &d.speed_table) {
            (Some(b), Some(s), _, _) => DiffusionSpec::from_expressions(b, s, self.window)?,
            (_, _, Some(sc), Some(sp)) => DiffusionSpec::from_csv_tables(
                &self.base_dir.join(sc),
                &self.base_dir.join(sp),
                self.window,
            )?,
            _ => unreachable!("validated"),
        };
        let mut spec = spec
            .with_atoms(d.atoms.clone())
            .with_tolerances(self.tolerances.model());
        if let Some(x0) = d.x0 {
            spec = spec.with_x0(x0);
        }
        Ok(spec)
    }

    pub fn diffusion(&self) -> Result<Diffusion> {
        Diffusion::new(self.spec()?)
    }

    pub fn report_tolerances(&self) -> ReportTolerances {
        ReportTolerances {
            bracket_rel: self.tolerances.bracket_rel,
            khasminskii_rel: self.tolerances.khasminskii_rel,
        }
    }

    /// Explicit anchors, or the configured quantiles evaluated on `d`.
    pub fn anchor_points(&self, d: &Diffusion) -> Option<Vec<f64>> {
        if let Some(p) = &self.anchors.points {
            return Some(p.clone());
        }
        self.anchors
            .quantiles
            .as_ref()
            .map(|q| q.iter().map(|&q| d.speed().quantile(q)).collect())
    }

    pub fn analysis_options(&self, d: &Diffusion) -> AnalysisOptions {
        AnalysisOptions {
            anchors: self.anchor_points(d),
            grid_size: self.numerics.grid_size,
            depth: self.numerics.depth,
            skip_moments: false,
            tolerances: self.report_tolerances(),
        }
    }

    /// Simulation settings; `from` defaults to one unit above `to`, `to`
    /// defaults to `x0`.
    pub fn sim_config(&self) -> SimConfig {
        let s = self.simulation;
        let target = s.to.or(self.diffusion.x0).unwrap_or(0.0);
        let start = s.from.unwrap_or(target + 1.0);
        SimConfig {
            step: s.step,
            t_max: s.t_max,
            paths: s.paths,
            seed: s.seed,
            start,
            target,
            side: if start >= target { Side::Plus } else { Side::Minus },
            bridge: s.bridge,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"
[diffusion]
drift = "-x"
sigma = "sqrt(2)"

[window]
lo = -8.0
hi = 8.0

[anchors]
points = [-1.0, 0.0, 1.0]

[simulation]
paths = 100
seed = 3
from = 1.0
to = 0.0
"#;

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::parse(OU).unwrap();
        assert_eq!(cfg.anchors.points.as_deref(), Some(&[-1.0, 0.0, 1.0][..]));
        let sim = cfg.sim_config();
        assert_eq!((sim.start, sim.target, sim.paths, sim.seed), (1.0, 0.0, 100, 3));
        assert_eq!(sim.side, Side::Plus);
        assert_eq!(cfg.numerics.grid_size, DEFAULT_GRID_SIZE);
        let d = cfg.diffusion().unwrap();
        assert!(d.certificate().passes());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "[diffusion]\ndrift = \"-x\"\n[window]\nlo = -1.0\nhi = 1.0\n",
            "[diffusion]\ndrift = \"-x\"\nsigma = \"1\"\n[window]\nlo = 1.0\nhi = -1.0\n",
            "[diffusion]\ndrift = \"-x\"\nsigma = \"1\"\n[window]\nlo = -1.0\nhi = 1.0\n[extra]\n",
            "not toml at all [",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
        let cfg = RunConfig::parse(&OU.replace("-x", "-x +")).unwrap();
        assert!(matches!(cfg.spec(), Err(Error::Parse { .. })));
    }

    #[test]
    fn quantile_anchors() {
        let text = OU.replace("points = [-1.0, 0.0, 1.0]", "quantiles = [0.5]");
        let cfg = RunConfig::parse(&text).unwrap();
        let d = cfg.diffusion().unwrap();
        let a = cfg.anchor_points(&d).unwrap();
        assert!(a[0].abs() < 1e-8);
    }
}
