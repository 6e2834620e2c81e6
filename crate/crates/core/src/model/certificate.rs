use serde::{Deserialize, Serialize};

use super::{DiffusionSpec, Tabulation};
use crate::serde_float;

/// Numerical evidence that the diffusion is positively recurrent on the
/// window: `S(±inf) = ±inf` (by threshold) and `m(R) < inf` (by tail probe).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCertificate {
    pub scale_diverges_left: bool,
    pub scale_diverges_right: bool,
    pub finite_mass: bool,
    /// Estimated speed mass beyond each window edge.
    #[serde(with = "serde_float")]
    pub tail_lo: f64,
    #[serde(with = "serde_float")]
    pub tail_hi: f64,
    /// `(tail_lo + tail_hi) / m(R)`.
    #[serde(with = "serde_float")]
    pub tail_relative: f64,
    /// Whether the relative tail mass is under the configured tolerance.
    pub window_tail_ok: bool,
    #[serde(with = "serde_float")]
    pub scale_lo: f64,
    #[serde(with = "serde_float")]
    pub scale_hi: f64,
    /// `S(q75) - S(q25)` over speed quantiles.
    #[serde(with = "serde_float")]
    pub typical_scale: f64,
    pub note: Option<String>,
}

impl RecurrenceCertificate {
    pub fn passes(&self) -> bool {
        self.scale_diverges_left && self.scale_diverges_right && self.finite_mass
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.scale_diverges_left {
            parts.push(format!("S(lo) = {:e} below divergence threshold", self.scale_lo));
        }
        if !self.scale_diverges_right {
            parts.push(format!("S(hi) = {:e} below divergence threshold", self.scale_hi));
        }
        if !self.finite_mass {
            parts.push("speed mass tail does not converge".to_string());
        }
        if let Some(n) = &self.note {
            parts.push(n.clone());
        }
        if parts.is_empty() {
            "all checks pass".into()
        } else {
            parts.join("; ")
        }
    }

    pub(crate) fn from_tabulation(tab: &Tabulation, spec: &DiffusionSpec) -> Self {
        let finite_mass = tab.tails_converged.0
            && tab.tails_converged.1
            && tab.tail_lo.is_finite()
            && tab.tail_hi.is_finite();
        let total = tab.total_mass();
        let q25 = tab.mass_quantile(0.25);
        let q75 = tab.mass_quantile(0.75);
        let typical = tab.scale_between(q25, q75).max(f64::MIN_POSITIVE);
        let s_lo = tab.scale(tab.lo());
        let s_hi = tab.scale(tab.hi());
        let factor = spec.tolerances.divergence_factor;
        let tail_relative = (tab.tail_lo + tab.tail_hi) / total;
        RecurrenceCertificate {
            scale_diverges_left: -s_lo > factor * typical,
            scale_diverges_right: s_hi > factor * typical,
            finite_mass,
            tail_lo: tab.tail_lo,
            tail_hi: tab.tail_hi,
            tail_relative,
            window_tail_ok: finite_mass && tail_relative <= spec.tolerances.tail_rel,
            scale_lo: s_lo,
            scale_hi: s_hi,
            typical_scale: typical,
            note: None,
        }
    }
}

/// Evaluates the three recurrence checks. A failing certificate is returned
/// as data; construction errors are recorded in `note`.
pub fn certify_recurrence(spec: &DiffusionSpec) -> RecurrenceCertificate {
    match Tabulation::build(spec) {
        Ok(tab) => RecurrenceCertificate::from_tabulation(&tab, spec),
        Err(e) => RecurrenceCertificate {
            scale_diverges_left: false,
            scale_diverges_right: false,
            finite_mass: false,
            tail_lo: f64::NAN,
            tail_hi: f64::NAN,
            tail_relative: f64::NAN,
            window_tail_ok: false,
            scale_lo: f64::NAN,
            scale_hi: f64::NAN,
            typical_scale: f64::NAN,
            note: Some(e.to_string()),
        },
    }
}
