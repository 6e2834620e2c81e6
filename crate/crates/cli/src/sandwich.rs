//! Fixed matrix of reference diffusions with known spectra, checked end to
//! end through every route.

use std::path::Path;

use hitgap::constants::{analyze, exit_lower_constant, vanishing_lambda_scan, AnalysisOptions};
use hitgap::kac::coefficient_table;
use hitgap::spectral::{build_grid, build_operator, full_gap, killed_gap, smallest_eigenvalues, Boundary};
use hitgap::{Diffusion, DiffusionSpec, Result, Side, Window};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{Outcome, RunManifest};

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    lower: f64,
    upper: f64,
    ok: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Check {
            name: name.into(),
            value,
            lower,
            upper,
            ok: lower <= value && value <= upper,
        }
    }

    fn near(name: impl Into<String>, value: f64, want: f64, rel: f64) -> Self {
        let tol = rel * want.abs();
        Check::within(name, value, want - tol, want + tol)
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check::within(name, v, 1.0, 1.0)
    }
}

fn reference_set() -> Vec<(&'static str, DiffusionSpec)> {
    vec![
        ("ou_theta1", DiffusionSpec::ornstein_uhlenbeck(1.0, Window::new(-8.0, 8.0))),
        ("ou_theta2", DiffusionSpec::ornstein_uhlenbeck(2.0, Window::new(-8.0, 8.0))),
        ("double_well", DiffusionSpec::double_well(Window::new(-4.0, 4.0))),
    ]
}

fn diffusion_checks(name: &str, spec: DiffusionSpec, n: usize) -> Result<(Vec<Check>, serde_json::Value)> {
    let d = Diffusion::new(spec)?;
    let anchors: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&q| d.speed().quantile(q)).collect();
    let opts = AnalysisOptions {
        anchors: Some(anchors),
        grid_size: n,
        ..AnalysisOptions::default()
    };
    let report = analyze(&d, &opts)?;
    let mut checks = vec![Check::flag(format!("{name}: all sandwiches"), report.passed())];
    for v in &report.violations {
        checks.push(Check::within(
            format!("{name}: {} at {:?} {:?}", v.check, v.anchor, v.side),
            v.value,
            v.lower,
            v.upper,
        ));
    }
    if let Some(theta) = name.strip_prefix("ou_theta").and_then(|t| t.parse::<f64>().ok()) {
        checks.push(Check::near(format!("{name}: full gap"), full_gap(&d, n, 2)?.gap, theta, 0.01));
        checks.push(Check::near(
            format!("{name}: killed gap at 0"),
            killed_gap(&d, 0.0, Side::Plus, n)?.gap,
            theta,
            0.01,
        ));
    }
    Ok((checks, serde_json::to_value(&report)?))
}

fn brownian_checks(n: usize) -> Result<Vec<Check>> {
    let d = Diffusion::new(DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0)))?;
    let op = build_operator(build_grid(&d, n)?, (Boundary::Dirichlet, Boundary::Dirichlet));
    let lambda = smallest_eigenvalues(&op, 1)?.gap;
    let half_pi2 = std::f64::consts::PI.powi(2) / 2.0;
    let bounds = exit_lower_constant(&d, 0.0, 1.0, 0.25, 0.75)?;
    Ok(vec![
        Check::near("brownian: dirichlet eigenvalue", lambda, half_pi2, 1e-3),
        Check::within("brownian: exit bracket", lambda, bounds.lambda_lower, bounds.lambda_upper),
    ])
}

fn combinatorial_checks() -> Result<Vec<Check>> {
    let t = coefficient_table(31)?;
    let ok = (0..=30).all(|n| t.row_sum(n) == t.get(n + 1, n) && t.get(n + 1, n) <= 4u128.pow(n as u32));
    Ok(vec![
        Check::flag("coefficients: row sums and 4^n bound", ok),
        Check::within("coefficients: a(4,3)", t.get(4, 3) as f64, 14.0, 14.0),
    ])
}

fn vanishing_checks() -> Result<Vec<Check>> {
    let d = Diffusion::new(DiffusionSpec::ornstein_uhlenbeck(1.0, Window::new(-8.0, 8.0)))?;
    let scan = vanishing_lambda_scan(&d, 0.0, 10.0)?;
    Ok(vec![Check::within("ou_theta1: vanishing scan product", scan.product, scan.needed, f64::INFINITY)])
}

pub fn run(out: &Path, grid_size: usize) -> Result<Outcome> {
    let mut manifest = RunManifest::new("sandwich-check", None, out)?;
    let output = manifest.resolve(json!({ "grid_size": grid_size }))?;
    let per: Vec<(Vec<Check>, serde_json::Value)> = reference_set()
        .into_par_iter()
        .map(|(name, spec)| diffusion_checks(name, spec, grid_size))
        .collect::<Result<_>>()?;
    manifest.stage("diffusions");
    let mut checks: Vec<Check> = Vec::new();
    let mut reports = serde_json::Map::new();
    for ((name, _), (c, r)) in reference_set().iter().zip(per) {
        checks.extend(c);
        reports.insert(name.to_string(), r);
    }
    checks.extend(brownian_checks(grid_size)?);
    checks.extend(combinatorial_checks()?);
    checks.extend(vanishing_checks()?);
    manifest.stage("reference checks");
    let passed = checks.iter().all(|c| c.ok);
    for c in &checks {
        println!("{} {}", if c.ok { "PASS" } else { "FAIL" }, c.name);
    }
    output.json("sandwich.json", &json!({ "passed": passed, "checks": checks, "reports": reports }))?;
    manifest.write(&output)?;
    Ok(if passed { Outcome::Pass } else { Outcome::Violations })
}
