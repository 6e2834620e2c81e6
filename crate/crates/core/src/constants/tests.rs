use std::sync::Arc;

use super::*;
use crate::model::{Diffusion, DiffusionSpec, Side, Window};

fn ou(theta: f64) -> Diffusion {
    Diffusion::new(DiffusionSpec::ornstein_uhlenbeck(theta, Window::new(-8.0, 8.0))).unwrap()
}

fn bm() -> Diffusion {
    Diffusion::new(DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0))).unwrap()
}

const OU_B0: f64 = 0.478_812_895_037_724_2;

#[test]
fn ou_b_matches_oracle() {
    let d = ou(1.0);
    let b = compute_b(&d, 0.0, Side::Plus).unwrap();
    assert!((b.value - OU_B0).abs() < 1e-9, "{}", b.value);
    assert!((b.argmax - 0.899_392_372_906_888_8).abs() < 1e-5);
    assert!(!b.infinite && !b.at_edge);
    let m = compute_b(&d, 0.0, Side::Minus).unwrap();
    assert!((m.value - OU_B0).abs() < 1e-9);
    assert!((0.25..=1.0).contains(&b.value));
    let brute = b_brute_force(&d, 0.0, Side::Plus, 100_000);
    assert!((brute - b.value).abs() < 1e-3 * b.value);
}

#[test]
fn b_is_monotone_in_anchor() {
    let d = Diffusion::new(DiffusionSpec::double_well(Window::new(-4.0, 4.0))).unwrap();
    let anchors = [-1.5, -1.0, -0.2, 0.0, 0.7, 1.2];
    let bs: Vec<BConstants> = anchors.iter().map(|&a| compute_b_constants(&d, a).unwrap()).collect();
    for w in bs.windows(2) {
        assert!(w[0].b_plus() >= w[1].b_plus());
        assert!(w[0].b_minus() <= w[1].b_minus());
    }
}

#[test]
fn empty_upper_mass_gives_zero() {
    // speed density vanishing above 0.5; scale still diverges in the tails
    // 1200 cells put a cell boundary exactly at the jump
    let tol = crate::model::ModelTolerances {
        cells: 1200,
        ..Default::default()
    };
    let spec = DiffusionSpec::densities(
        Arc::new(|x: f64| (x * x).exp()),
        Arc::new(|x: f64| if x <= 0.5 { (-x * x).exp() } else { 0.0 }),
        Window::new(-6.0, 6.0),
    )
    .with_tolerances(tol);
    let d = Diffusion::new(spec).unwrap();
    d.require_certificate().unwrap();
    let b = compute_b(&d, 0.5, Side::Plus).unwrap();
    assert_eq!(b.value, 0.0);
}

#[test]
fn b_uses_left_limit_at_atoms() {
    let base = DiffusionSpec::ornstein_uhlenbeck(1.0, Window::new(-8.0, 8.0));
    let d = Diffusion::new(base.with_atoms(vec![(2.0, 1.0)])).unwrap();
    let b = compute_b(&d, 0.0, Side::Plus).unwrap();
    let left_limit = d.speed().above_closed(2.0) * d.scale().between(0.0, 2.0);
    assert!(b.at_atom);
    assert!((b.value - left_limit).abs() < 1e-12 * left_limit);
}

#[test]
fn lambda_bound_arithmetic() {
    let l = lambda_bounds(1.0);
    assert_eq!((l.lower, l.upper), (0.25, 1.0));
    let l = lambda_bounds(0.5);
    assert_eq!((l.lower, l.upper), (0.5, 2.0));
    let l = lambda_bounds(f64::INFINITY);
    assert_eq!((l.lower, l.upper), (0.0, 0.0));
    let l = lambda_bounds(0.0);
    assert!(l.no_upper_constraint);
    assert!(l.contains(1e9, 0.0));
}

#[test]
fn brownian_exit_constants() {
    let d = bm();
    let up = exit_upper_constant(&d, 0.0, 1.0).unwrap();
    assert!((up.c - 1.0 / 3.0).abs() < 1e-13);
    let bounds = exit_lower_constant(&d, 0.0, 1.0, 0.25, 0.75).unwrap();
    assert!((bounds.kappa1 - 0.5).abs() < 1e-14);
    assert!((bounds.kappa2 - 0.5).abs() < 1e-14);
    assert!((bounds.c_lower - 0.0625).abs() < 1e-13);
    let gap = std::f64::consts::PI.powi(2) / 2.0;
    assert!(bounds.contains(gap, 0.0));
    assert!(exit_lower_constant(&d, 0.0, 1.0, 0.75, 0.25).is_err());
}

#[test]
fn identity_scale_kappas() {
    // S = x: a = 0, a' = 1, b' = 2, b = 3
    let spec = DiffusionSpec::densities(Arc::new(|_| 1.0), Arc::new(|x: f64| 1.0 + x), Window::new(0.0, 3.0));
    let d = Diffusion::new(spec).unwrap();
    let e = exit_lower_constant(&d, 0.0, 3.0, 1.0, 2.0).unwrap();
    assert!((e.kappa1 - 1.0).abs() < 1e-14 && (e.kappa2 - 1.0).abs() < 1e-14);
    let mass = d.speed().closed(1.0, 2.0);
    assert!((e.c_lower - mass / 3.0).abs() < 1e-13);
}

#[test]
fn exit_constant_ignores_outside_atoms_and_flags_empty_mass() {
    let d = bm();
    let with = Diffusion::new(
        DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0)).with_atoms(vec![(0.9, 3.0)]),
    )
    .unwrap();
    let c0 = exit_upper_constant(&d, 0.1, 0.6).unwrap().c;
    let c1 = exit_upper_constant(&with, 0.1, 0.6).unwrap().c;
    assert!((c0 - c1).abs() < 1e-15);
    let empty = Diffusion::new(DiffusionSpec::densities(
        Arc::new(|_| 1.0),
        Arc::new(|x: f64| if x < 0.5 { 1.0 } else { 0.0 }),
        Window::new(0.0, 1.0),
    ))
    .unwrap();
    let e = exit_upper_constant(&empty, 0.5, 1.0).unwrap();
    assert!(e.empty_mass && e.lambda_lower.is_infinite());
}

#[test]
fn vanishing_scan() {
    let d = ou(1.0);
    let r = vanishing_lambda_scan(&d, 0.0, 10.0).unwrap();
    assert!(r.product > 0.3);
    assert!(r.a < r.a_inner && r.a_inner <= 0.0 && 0.0 <= r.b_inner && r.b_inner < r.b);
    let s = d.scale();
    let inner = s.between(r.a_inner, r.b_inner);
    assert!((s.between(r.a, r.a_inner) - inner).abs() < 1e-8 * inner);
    assert!((s.between(r.b_inner, r.b) - inner).abs() < 1e-8 * inner);
    let mut prev = r;
    for lambda in [5.0, 2.0, 1.0, 0.5] {
        let next = vanishing_lambda_scan(&d, 0.0, lambda).unwrap();
        assert!(next.b >= prev.b && next.a <= prev.a);
        prev = next;
    }
    assert!(matches!(
        vanishing_lambda_scan(&d, 0.0, 1e-15),
        Err(crate::Error::WindowExceeded { .. })
    ));
}

#[test]
fn ou_report_passes() {
    let d = ou(1.0);
    let opts = AnalysisOptions {
        anchors: Some(vec![-1.0, 0.0, 1.0]),
        grid_size: 2000,
        ..Default::default()
    };
    let r = analyze(&d, &opts).unwrap();
    assert!(r.passed(), "{:?}", r.violations);
    assert!((r.poincare_constant - 1.0).abs() < 1e-2);
    let mid = &r.anchors[1];
    assert!((mid.plus.hardy_constant - mid.minus.hardy_constant).abs() < 1e-6);
    assert!(r.finiteness_consistent);
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    let back: ConstantsReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back.anchors.len(), 3);
}

#[test]
fn report_flags_escaped_values() {
    let d = ou(1.0);
    let b = compute_b_constants(&d, 0.0).unwrap();
    let input = AnchorInput {
        b,
        gamma_plus: 10.0,
        gamma_minus: 1.0,
        lambda_plus: None,
        lambda_minus: None,
    };
    let r = assemble_report(&[input], 1.0, ReportTolerances::default());
    assert!(!r.passed());
    assert!(r.violations.iter().any(|v| v.check == "hardy" && v.side == Some(Side::Plus)));
}
