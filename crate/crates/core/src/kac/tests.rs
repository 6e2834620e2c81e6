use proptest::prelude::*;

use super::*;
use crate::model::{Diffusion, DiffusionSpec, Side, Window};

fn bm() -> Diffusion {
    Diffusion::new(DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0))).unwrap()
}

fn ou(theta: f64) -> Diffusion {
    Diffusion::new(DiffusionSpec::ornstein_uhlenbeck(theta, Window::new(-8.0, 8.0))).unwrap()
}

fn brute_b_plus(d: &Diffusion, a: f64) -> f64 {
    let hi = d.window().hi;
    (1..=20_000)
        .map(|i| a + (hi - a) * i as f64 / 20_000.0)
        .map(|x| d.speed().above(x) * d.scale().between(a, x))
        .fold(0.0, f64::max)
}

#[test]
fn bounded_kernel_values() {
    let d = bm();
    assert!((green_bounded(d.scale(), 0.0, 1.0, 0.5, 0.25).unwrap() - 0.125).abs() < 1e-15);
    assert_eq!(green_bounded(d.scale(), 0.0, 1.0, 0.3, 0.0).unwrap(), 0.0);
    assert!(green_bounded(d.scale(), 0.0, 1.0, 1.2, 0.5).is_err());
    assert!(green_bounded(d.scale(), 1.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn halfline_kernel_values() {
    let d = Diffusion::new(DiffusionSpec::brownian_surrogate(Window::new(-1.0, 4.0))).unwrap();
    let s = d.scale();
    assert!((green_halfline(s, Side::Plus, 0.0, 2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
    assert_eq!(green_halfline(s, Side::Plus, 0.0, 2.0, 0.0).unwrap(), 0.0);
    for xi in [2.0, 2.5, 3.9] {
        assert!((green_halfline(s, Side::Plus, 0.0, 2.0, xi).unwrap() - 2.0).abs() < 1e-14);
    }
    assert!((green_halfline(s, Side::Minus, 1.0, -0.5, 0.5).unwrap() - 0.5).abs() < 1e-14);
    assert!(green_halfline(s, Side::Plus, 0.0, -0.5, 1.0).is_err());
    let k = GreenKernel::new(Interval::HalfLine { a: 0.0, side: Side::Plus }, s.clone()).unwrap();
    assert!((k.eval(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn brownian_exit_moments() {
    let d = bm();
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let t = exit_moments(&d, 0.0, 1.0, &grid, 2).unwrap();
    for (i, &x) in grid.iter().enumerate() {
        assert_eq!(t.mu(0, i), 1.0);
        assert!((t.mu(1, i) - x * (1.0 - x)).abs() < 1e-12);
        let second = x * (1.0 - x) * (1.0 + x - x * x) / 3.0;
        assert!((2.0 * t.mu(2, i) - second).abs() < 1e-12);
    }
    let mid = grid.iter().position(|&x| x == 0.5).unwrap();
    assert!((t.raw_moment(2, mid) - 0.104_166_666_666_666_67).abs() < 1e-12);
}

#[test]
fn brownian_moments_bounded_by_powers_of_c() {
    // C = (1 / (S(b) - S(a))) ∫ (S(b) - S(y)) (S(y) - S(a)) dm = 1/3
    let d = bm();
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let t = exit_moments(&d, 0.0, 1.0, &grid, 40).unwrap();
    for n in 0..=40 {
        for i in 0..grid.len() {
            assert!(t.ln_mu(n, i) <= n as f64 * (1.0f64 / 3.0).ln() + 1e-9);
        }
    }
}

#[test]
fn recursion_matches_nested_quadrature() {
    // μ_2 = G G 1 by a direct double integral of the kernel
    let d = ou(1.0);
    let (a, b) = (-1.0, 1.5);
    let x = 0.3;
    let t = exit_moments(&d, a, b, &[x], 2).unwrap();
    let rule = crate::quadrature::GaussRule::new(30);
    let g = |u: f64, v: f64| green_bounded(d.scale(), a, b, u, v).unwrap();
    let mu1 = |y: f64| {
        let f = |z: f64| g(y, z) * d.speed().density(z);
        crate::quadrature::gauss_integrate(&rule, &f, a, y) + crate::quadrature::gauss_integrate(&rule, &f, y, b)
    };
    assert!((mu1(x) - t.mu(1, 0)).abs() < 1e-9 * t.mu(1, 0));
    let f = |y: f64| g(x, y) * mu1(y) * d.speed().density(y);
    let mu2 = crate::quadrature::gauss_integrate(&rule, &f, a, x) + crate::quadrature::gauss_integrate(&rule, &f, x, b);
    assert!((mu2 - t.mu(2, 0)).abs() < 1e-8 * mu2);
}

#[test]
fn ou_first_hitting_moment() {
    let d = ou(1.0);
    let t = hitting_moments(&d, 0.0, Side::Plus, &[1.0], 1).unwrap();
    assert!((t.mu(1, 0) - 0.901_908_012_652_806_5).abs() < 1e-9);
    let m = hitting_moments(&d, 0.0, Side::Minus, &[-1.0], 1).unwrap();
    assert!((m.mu(1, 0) - 0.901_908_012_652_806_5).abs() < 1e-9);
}

#[test]
fn hitting_moments_vanish_at_anchor_and_increase() {
    let d = ou(1.0);
    let grid: Vec<f64> = [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 4.0, 7.9].to_vec();
    let t = hitting_moments(&d, 0.0, Side::Plus, &grid, 6).unwrap();
    assert!(t.mu(1, 0) < 1e-5);
    for n in 1..=6 {
        for i in 1..grid.len() {
            assert!(t.mu(n, i) > t.mu(n, i - 1));
        }
    }
    assert!(hitting_moments(&d, 0.0, Side::Plus, &[0.0], 2).is_err());
    assert!(hitting_moments(&d, 0.0, Side::Minus, &[0.5], 2).is_err());
}

#[test]
fn hitting_requires_certificate() {
    // too narrow: the scale function does not diverge there
    let d = Diffusion::new(DiffusionSpec::ornstein_uhlenbeck(1.0, Window::new(-1.0, 1.0))).unwrap();
    assert!(matches!(
        hitting_moments(&d, 0.0, Side::Plus, &[0.5], 2),
        Err(crate::Error::CertificateRequired(_))
    ));
}

#[test]
fn g_is_j_plus_k() {
    let d = ou(1.0);
    let grid = [0.5, 1.0, 3.0];
    let space = PanelSpace::new(&d, Interval::HalfLine { a: 0.0, side: Side::Plus }, &grid).unwrap();
    let one = space.constant(1.0);
    let j = jk_apply(&space, Operator::J, &one).unwrap();
    let k = jk_apply(&space, Operator::K, &one).unwrap();
    let t = hitting_moments(&d, 0.0, Side::Plus, &grid, 1).unwrap();
    for i in 0..grid.len() {
        assert!((j.grid[i] + k.grid[i] - t.mu(1, i)).abs() < 1e-12 * t.mu(1, i));
    }
    let zero = space.constant(0.0);
    assert!(jk_apply(&space, Operator::J, &zero).unwrap().grid.iter().all(|v| *v == 0.0));
    assert!(jk_apply(&space, Operator::K, &zero).unwrap().nodes.iter().all(|v| *v == 0.0));
}

#[test]
fn jk_bound_and_expansion() {
    let d = ou(1.0);
    let b = brute_b_plus(&d, 0.0);
    let grid: Vec<f64> = (1..=30).map(|i| i as f64 * 0.25).collect();
    let space = PanelSpace::new(&d, Interval::HalfLine { a: 0.0, side: Side::Plus }, &grid).unwrap();
    let one = space.constant(1.0);
    let k1 = space.apply(Operator::K, &one).unwrap();
    let jk1 = space.apply(Operator::J, &k1).unwrap();
    let g1 = space.apply(Operator::G, &one).unwrap();
    for i in 0..grid.len() {
        assert!(jk1.grid[i] <= b * g1.grid[i] * (1.0 + 1e-9));
    }
    // μ_n ≤ Σ_l a_{n,l} B^l K^{n-l} 1
    let depth = 10;
    let coeffs = coefficient_table(depth).unwrap();
    let table = hitting_moments(&d, 0.0, Side::Plus, &grid, depth).unwrap();
    let mut kpow = vec![one.clone()];
    for _ in 0..depth {
        kpow.push(space.apply(Operator::K, kpow.last().unwrap()).unwrap());
    }
    for n in 1..=depth {
        for (i, x) in grid.iter().enumerate() {
            let bound: f64 = (0..=n)
                .map(|l| coeffs.get(n, l) as f64 * b.powi(l as i32) * kpow[n - l].grid[i])
                .sum();
            assert!(table.mu(n, i) <= bound * (1.0 + 1e-9), "n {n} x {x}");
        }
    }
}

#[test]
fn integrated_series_bound() {
    // Σ λ^n ∫ μ_n dm ≤ Σ λ^n (4B)^n m((a, inf)) for λ < 1/(4B)
    let d = ou(1.0);
    let b = brute_b_plus(&d, 0.0);
    let space = PanelSpace::new(&d, Interval::HalfLine { a: 0.0, side: Side::Plus }, &[]).unwrap();
    let mass = d.speed().above(0.0);
    let lambda = 0.9 / (4.0 * b);
    let mut f = space.constant(1.0);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for n in 0..=30 {
        lhs += lambda.powi(n) * space.integrate(&f);
        rhs += (lambda * 4.0 * b).powi(n) * mass;
        assert!(lhs <= rhs * (1.0 + 1e-9));
        f = space.apply(Operator::G, &f).unwrap();
    }
}

#[test]
fn ou_lambda_estimates() {
    for theta in [1.0, 2.0] {
        let d = ou(theta);
        let est = estimate_lambda(&d, 0.0, Side::Plus, &[0.5, 2.0], DEFAULT_DEPTH).unwrap();
        assert!(est.stabilized, "{est:?}");
        assert!(est.consistent);
        assert!((est.estimate - theta).abs() < 1e-3 * theta, "theta {theta}: {}", est.estimate);
        let minus = estimate_lambda(&d, 0.0, Side::Minus, &[-0.5, -2.0], DEFAULT_DEPTH).unwrap();
        assert!((minus.estimate - est.estimate).abs() < 1e-8);
        assert!(est.to_json().unwrap().contains("\"estimate\""));
    }
}

#[test]
fn moment_csv_layout() {
    let t = exit_moments(&bm(), 0.0, 1.0, &[0.25, 0.5], 2).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,n,mu_n");
    assert_eq!(lines.len(), 1 + 3 * 2);
}

#[test]
fn aitken_accelerates_geometric_sequence() {
    let seq: Vec<f64> = (0..10).map(|n| 2.0 + 0.5f64.powi(n)).collect();
    let acc = aitken(&seq);
    assert!(acc.iter().all(|v| (v - 2.0).abs() < 1e-12));
}

proptest! {
    #[test]
    fn bounded_kernel_is_symmetric(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let d = &*BM;
        let g1 = green_bounded(d.scale(), 0.0, 1.0, x, y).unwrap();
        let g2 = green_bounded(d.scale(), 0.0, 1.0, y, x).unwrap();
        prop_assert!(g1 >= 0.0);
        prop_assert!((g1 - g2).abs() <= 1e-15);
    }
}

static BM: std::sync::LazyLock<Diffusion> = std::sync::LazyLock::new(bm);
