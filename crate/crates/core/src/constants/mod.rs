//! `B_a^±`, the exponential-moment bounds, exit-time bounds on bounded
//! intervals and the sandwich reports tying the three routes together.

mod b;
mod exit;
mod report;

pub use b::{
    b_brute_force, b_product, compute_b, compute_b_constants, lambda_bounds, BConstants, BSearch,
    LambdaBounds, DIVERGENCE_RATIO, SCAN_POINTS,
};
pub use exit::{
    exit_lower_constant, exit_upper_constant, vanishing_lambda_scan, ExitBounds, ExitUpper, VanishingScan,
};
pub use report::{
    analyze, analyze_detailed, assemble_report, default_anchors, starting_points, AnalysisOptions, AnchorInput, AnchorReport,
    Bracket, ConstantsReport, ReportTolerances, SideReport, Violation, DEFAULT_ANCHOR_QUANTILES,
};

#[cfg(test)]
mod tests;
