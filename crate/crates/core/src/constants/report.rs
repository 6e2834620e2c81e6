use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kac::{estimate_lambda, LambdaEstimate, DEFAULT_DEPTH};
use crate::model::{Diffusion, Side};
use crate::serde_float;
use crate::spectral::{full_gap, killed_gap, DEFAULT_GRID_SIZE};

use super::{compute_b_constants, lambda_bounds, BConstants, LambdaBounds};

/// Speed quantiles used as default anchors.
pub const DEFAULT_ANCHOR_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportTolerances {
    /// Relative slack on every inequality.
    pub bracket_rel: f64,
    /// Allowed `|γ_a - λ̂_a| / γ_a`.
    pub khasminskii_rel: f64,
}

impl Default for ReportTolerances {
    fn default() -> Self {
        ReportTolerances {
            bracket_rel: 1e-3,
            khasminskii_rel: 0.05,
        }
    }
}

/// `lower ≤ value ≤ upper` up to the relative slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(with = "serde_float")]
    pub lower: f64,
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(with = "serde_float")]
    pub upper: f64,
    pub ok: bool,
}

impl Bracket {
    pub fn check(lower: f64, value: f64, upper: f64, rel: f64) -> Self {
        let ok = value >= lower * (1.0 - rel) && value <= upper * (1.0 + rel) || (value == lower && value == upper);
        Bracket {
            lower,
            value,
            upper,
            ok,
        }
    }
}

/// Per-anchor inputs to [`assemble_report`].
#[derive(Debug, Clone)]
pub struct AnchorInput {
    pub b: BConstants,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub lambda_plus: Option<LambdaEstimate>,
    pub lambda_minus: Option<LambdaEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    #[serde(with = "serde_float")]
    pub b: f64,
    pub lambda_bounds: LambdaBounds,
    #[serde(with = "serde_float")]
    pub gamma: f64,
    /// Hardy constant `A = 1/γ_a`.
    #[serde(with = "serde_float")]
    pub hardy_constant: f64,
    /// `B ≤ A ≤ 4B`.
    pub hardy: Bracket,
    /// Realized `B γ` (at most one) and `4 B γ` (at least one).
    #[serde(with = "serde_float")]
    pub b_gamma: f64,
    #[serde(with = "serde_float")]
    pub four_b_gamma: f64,
    pub lambda_hat: Option<f64>,
    /// `1/(4B) ≤ λ̂ ≤ 1/B`.
    pub expmoments: Option<Bracket>,
    pub khasminskii_rel: Option<f64>,
    pub khasminskii_ok: Option<bool>,
    pub lambda_stabilized: Option<bool>,
    pub lambda_consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorReport {
    pub a: f64,
    pub plus: SideReport,
    pub minus: SideReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub anchor: Option<f64>,
    pub side: Option<Side>,
    #[serde(with = "serde_float")]
    pub value: f64,
    #[serde(with = "serde_float")]
    pub lower: f64,
    #[serde(with = "serde_float")]
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub anchors: Vec<AnchorReport>,
    #[serde(with = "serde_float")]
    pub gamma: f64,
    /// `c_P = 1/γ`.
    #[serde(with = "serde_float")]
    pub poincare_constant: f64,
    /// `sup_a (A⁺ ∧ A⁻) ≤ c_P ≤ inf_a (A⁺ ∨ A⁻)`.
    pub poincare: Bracket,
    /// `B_a^±` finite at every anchor or at none, per side.
    pub finiteness_consistent: bool,
    pub tolerances: ReportTolerances,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ConstantsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per anchor.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["a".to_string()];
        for s in ["plus", "minus"] {
            for col in [
                "b", "gamma", "hardy_constant", "lambda_lower", "lambda_upper", "lambda_hat", "hardy_ok",
                "expmoments_ok", "khasminskii_ok",
            ] {
                header.push(format!("{col}_{s}"));
            }
        }
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let optb = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.anchors {
            let mut row = vec![format!("{:e}", r.a)];
            for s in [&r.plus, &r.minus] {
                row.extend([
                    format!("{:e}", s.b),
                    format!("{:e}", s.gamma),
                    format!("{:e}", s.hardy_constant),
                    format!("{:e}", s.lambda_bounds.lower),
                    format!("{:e}", s.lambda_bounds.upper),
                    opt(s.lambda_hat),
                    s.hardy.ok.to_string(),
                    optb(s.expmoments.map(|b| b.ok)),
                    optb(s.khasminskii_ok),
                ]);
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn side_report(
    side: Side,
    b: f64,
    gamma: f64,
    est: Option<&LambdaEstimate>,
    tol: &ReportTolerances,
) -> SideReport {
    let bounds = lambda_bounds(b);
    let a = 1.0 / gamma;
    let hardy = Bracket::check(b, a, 4.0 * b, tol.bracket_rel);
    let lambda_hat = est.map(|e| e.estimate);
    let expmoments = lambda_hat.map(|l| {
        let upper = if bounds.no_upper_constraint { f64::INFINITY } else { bounds.upper };
        Bracket::check(bounds.lower, l, upper, tol.bracket_rel)
    });
    let khasminskii_rel = lambda_hat.map(|l| (gamma - l).abs() / gamma);
    SideReport {
        side,
        b,
        lambda_bounds: bounds,
        gamma,
        hardy_constant: a,
        hardy,
        b_gamma: b * gamma,
        four_b_gamma: 4.0 * b * gamma,
        lambda_hat,
        expmoments,
        khasminskii_rel,
        khasminskii_ok: khasminskii_rel.map(|r| r <= tol.khasminskii_rel),
        lambda_stabilized: est.map(|e| e.stabilized),
        lambda_consistent: est.map(|e| e.consistent),
    }
}

/// Fills every bracket and records the ones that fail.
pub fn assemble_report(inputs: &[AnchorInput], gamma: f64, tol: ReportTolerances) -> ConstantsReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let mut anchors = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let a = inp.b.a;
        let plus = side_report(Side::Plus, inp.b.b_plus(), inp.gamma_plus, inp.lambda_plus.as_ref(), &tol);
        let minus = side_report(Side::Minus, inp.b.b_minus(), inp.gamma_minus, inp.lambda_minus.as_ref(), &tol);
        for s in [&plus, &minus] {
            let mut flag = |check: &str, br: &Bracket| {
                if !br.ok {
                    violations.push(Violation {
                        check: check.into(),
                        anchor: Some(a),
                        side: Some(s.side),
                        value: br.value,
                        lower: br.lower,
                        upper: br.upper,
                    });
                }
            };
            flag("hardy", &s.hardy);
            if let Some(br) = &s.expmoments {
                flag("expmoments", br);
            }
            if s.khasminskii_ok == Some(false) {
                violations.push(Violation {
                    check: "khasminskii".into(),
                    anchor: Some(a),
                    side: Some(s.side),
                    value: s.lambda_hat.unwrap_or(f64::NAN),
                    lower: s.gamma * (1.0 - tol.khasminskii_rel),
                    upper: s.gamma * (1.0 + tol.khasminskii_rel),
                });
            }
            if s.lambda_stabilized == Some(false) {
                warnings.push(format!("moment ratios did not stabilize at a = {a} ({})", s.side));
            }
            if s.lambda_consistent == Some(false) {
                warnings.push(format!("starting points disagree on λ at a = {a} ({})", s.side));
            }
        }
        anchors.push(AnchorReport { a, plus, minus });
    }

    let lower = anchors
        .iter()
        .map(|r| r.plus.hardy_constant.min(r.minus.hardy_constant))
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = anchors
        .iter()
        .map(|r| r.plus.hardy_constant.max(r.minus.hardy_constant))
        .fold(f64::INFINITY, f64::min);
    let c_p = 1.0 / gamma;
    let poincare = Bracket::check(lower, c_p, upper, tol.bracket_rel);
    if !poincare.ok {
        violations.push(Violation {
            check: "poincare".into(),
            anchor: None,
            side: None,
            value: c_p,
            lower,
            upper,
        });
    }
    let all_or_none = |f: &dyn Fn(&AnchorReport) -> f64| {
        let finite = anchors.iter().filter(|r| f(r).is_finite()).count();
        finite == 0 || finite == anchors.len()
    };
    let finiteness_consistent = all_or_none(&|r| r.plus.b) && all_or_none(&|r| r.minus.b);
    if !finiteness_consistent {
        violations.push(Violation {
            check: "b-finiteness".into(),
            anchor: None,
            side: None,
            value: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
        });
    }
    ConstantsReport {
        anchors,
        gamma,
        poincare_constant: c_p,
        poincare,
        finiteness_consistent,
        tolerances: tol,
        violations,
        warnings,
    }
}

/// Settings for [`analyze`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Explicit anchors; speed quantiles when `None`.
    pub anchors: Option<Vec<f64>>,
    pub grid_size: usize,
    pub depth: usize,
    /// Skip the moment route (no `λ̂`).
    pub skip_moments: bool,
    pub tolerances: ReportTolerances,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            anchors: None,
            grid_size: DEFAULT_GRID_SIZE,
            depth: DEFAULT_DEPTH,
            skip_moments: false,
            tolerances: ReportTolerances::default(),
        }
    }
}

pub fn default_anchors(d: &Diffusion) -> Vec<f64> {
    DEFAULT_ANCHOR_QUANTILES.iter().map(|&q| d.speed().quantile(q)).collect()
}

/// Two starting points on the `side` of `a`, where the remaining speed mass
/// beyond them is one half and one fifth of the mass beyond `a`.
pub fn starting_points(d: &Diffusion, a: f64, side: Side) -> Vec<f64> {
    let m = d.speed();
    let total = m.total();
    let below = m.cumulative(a);
    [0.5, 0.8]
        .iter()
        .map(|&f| match side {
            Side::Plus => m.quantile((below + f * (total - below)) / total),
            Side::Minus => m.quantile((1.0 - f) * below / total),
        })
        .collect()
}

/// Runs B, the killed and full spectra and the moment estimator for every
/// anchor, concurrently over anchors.
pub fn analyze(d: &Diffusion, opts: &AnalysisOptions) -> Result<ConstantsReport> {
    Ok(analyze_detailed(d, opts)?.0)
}

/// [`analyze`], also returning the per-anchor inputs (B searches and ratio
/// sequences) for plot data.
pub fn analyze_detailed(d: &Diffusion, opts: &AnalysisOptions) -> Result<(ConstantsReport, Vec<AnchorInput>)> {
    d.require_certificate()?;
    let anchors = opts.anchors.clone().unwrap_or_else(|| default_anchors(d));
    let (full, inputs) = rayon::join(
        || full_gap(d, opts.grid_size, 2),
        || {
            anchors
                .par_iter()
                .map(|&a| anchor_input(d, a, opts))
                .collect::<Result<Vec<_>>>()
        },
    );
    let full = full?;
    let inputs = inputs?;
    Ok((assemble_report(&inputs, full.gap, opts.tolerances), inputs))
}

fn anchor_input(d: &Diffusion, a: f64, opts: &AnalysisOptions) -> Result<AnchorInput> {
    let b = compute_b_constants(d, a)?;
    let gamma_plus = killed_gap(d, a, Side::Plus, opts.grid_size)?.gap;
    let gamma_minus = killed_gap(d, a, Side::Minus, opts.grid_size)?.gap;
    let estimate = |side| -> Result<Option<LambdaEstimate>> {
        if opts.skip_moments {
            return Ok(None);
        }
        Ok(Some(estimate_lambda(d, a, side, &starting_points(d, a, side), opts.depth)?))
    };
    Ok(AnchorInput {
        b,
        gamma_plus,
        gamma_minus,
        lambda_plus: estimate(Side::Plus)?,
        lambda_minus: estimate(Side::Minus)?,
    })
}
