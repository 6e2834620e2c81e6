use super::*;
use crate::model::{Diffusion, DiffusionSpec, Side, Window};

fn bm() -> Diffusion {
    Diffusion::new(DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0))).unwrap()
}

fn ou(theta: f64) -> Diffusion {
    Diffusion::new(DiffusionSpec::ornstein_uhlenbeck(theta, Window::new(-8.0, 8.0))).unwrap()
}

#[test]
fn uniform_masses_for_brownian_surrogate() {
    let n = 200;
    let g = build_grid(&bm(), n).unwrap();
    for i in 1..n {
        assert!((g.masses[i] - 2.0 / n as f64).abs() < 1e-13);
        assert!((g.conductances[i] - n as f64).abs() < 1e-9);
    }
    assert!((g.masses[0] - 1.0 / n as f64).abs() < 1e-13);
    assert!((g.total_mass() - 2.0).abs() < 1e-12);
}

#[test]
fn atom_lumped_into_one_cell() {
    let spec = DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0)).with_atoms(vec![(0.3, 0.7)]);
    let d = Diffusion::new(spec).unwrap();
    let n = 100;
    let plain = build_grid(&bm(), n).unwrap();
    let g = build_grid(&d, n).unwrap();
    let changed: Vec<usize> = (0..=n).filter(|&i| (g.masses[i] - plain.masses[i]).abs() > 1e-12).collect();
    assert_eq!(changed.len(), 1);
    assert!((g.masses[changed[0]] - plain.masses[changed[0]] - 0.7).abs() < 1e-13);
}

#[test]
fn ou_grid_conserves_mass() {
    let d = ou(1.0);
    let g = build_grid(&d, 1000).unwrap();
    assert!((g.total_mass() - d.speed().total()).abs() < 1e-9 * d.speed().total());
}

#[test]
fn operator_structure() {
    let d = ou(1.0);
    let grid = build_grid(&d, 300).unwrap();
    let op = build_operator(grid.clone(), (Boundary::Neumann, Boundary::Neumann));
    let lc = op.apply(&vec![3.0; grid.len()]);
    assert!(lc.iter().all(|v| v.abs() < 1e-9));
    for i in 0..grid.len() - 1 {
        let lhs = grid.masses[i] * op.entry(i, i + 1);
        let rhs = grid.masses[i + 1] * op.entry(i + 1, i);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }
    let f: Vec<f64> = grid.nodes.iter().map(|x| (1.3 * x).sin() + 0.1 * x * x).collect();
    let lf = op.apply(&f);
    let form: f64 = lf.iter().zip(&f).zip(&grid.masses).map(|((a, b), m)| a * b * m).sum();
    let energy = grid.energy(&f);
    assert!((form - energy).abs() <= 1e-10 * energy);
}

#[test]
fn dirichlet_laplacian() {
    let op = build_operator(build_grid(&bm(), 4000).unwrap(), (Boundary::Dirichlet, Boundary::Dirichlet));
    let r = smallest_eigenvalues(&op, 3).unwrap();
    let half_pi2 = std::f64::consts::PI.powi(2) / 2.0;
    assert!((r.eigenvalues[0] - half_pi2).abs() < 1e-5 * half_pi2);
    assert!((r.eigenvalues[1] - 4.0 * half_pi2).abs() < 1e-4 * half_pi2);
    assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn neumann_ground_state_is_zero() {
    let op = build_operator(build_grid(&bm(), 500).unwrap(), (Boundary::Neumann, Boundary::Neumann));
    let r = smallest_eigenvalues(&op, 2).unwrap();
    assert!(r.eigenvalues[0].abs() <= 1e-10, "{}", r.eigenvalues[0]);
    let half_pi2 = std::f64::consts::PI.powi(2) / 2.0;
    assert!((r.eigenvalues[1] - half_pi2).abs() < 1e-4 * half_pi2);
    assert!(smallest_eigenvalues(&op, 7).is_err());
}

#[test]
fn ou_gaps_match_hermite_spectrum() {
    for theta in [1.0, 2.0] {
        let d = ou(theta);
        let full = full_gap(&d, 4000, 3).unwrap();
        assert!((full.gap - theta).abs() < 1e-3 * theta, "{}", full.gap);
        assert!((full.eigenvalues[2] - 2.0 * theta).abs() < 2e-3 * theta);
        let plus = killed_gap(&d, 0.0, Side::Plus, 4000).unwrap();
        let minus = killed_gap(&d, 0.0, Side::Minus, 4000).unwrap();
        assert!((plus.gap - theta).abs() < 1e-3 * theta);
        assert!((plus.gap - minus.gap).abs() < 1e-8 * plus.gap);
    }
}

#[test]
fn killed_gap_positive_for_quantile_anchors() {
    let d = Diffusion::new(DiffusionSpec::double_well(Window::new(-4.0, 4.0))).unwrap();
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let a = d.speed().quantile(q);
        for side in [Side::Plus, Side::Minus] {
            assert!(killed_gap(&d, a, side, 1000).unwrap().gap > 0.0);
        }
    }
}

#[test]
fn rayleigh_quotients() {
    let d = ou(1.0);
    let r = killed_spectrum(&d, 0.0, Side::Plus, 2000, 1).unwrap();
    let grid = build_grid_on(&d, 0.0, 8.0, 2000).unwrap();
    let q = variational_check(&grid, &r.eigenvectors[0], VariationalMode::Hardy { a: 0.0, side: Side::Plus }).unwrap();
    assert!((q - 1.0 / r.gap).abs() < 1e-8 / r.gap);

    // F = S(x ∧ r) - S(a) gives at least m((r, ∞)) (S(r) - S(a))
    let rr = grid.nodes[250];
    let f: Vec<f64> = grid.nodes.iter().map(|&x| d.scale().between(0.0, x.min(rr))).collect();
    let q = variational_check(&grid, &f, VariationalMode::Hardy { a: 0.0, side: Side::Plus }).unwrap();
    let bound = d.speed().above(rr) * d.scale().between(0.0, rr);
    assert!(q >= bound * (1.0 - 1e-3), "{q} vs {bound}");

    let full = build_grid(&d, 500).unwrap();
    assert!(matches!(
        variational_check(&full, &vec![1.0; full.len()], VariationalMode::Poincare),
        Err(crate::Error::DegenerateFunction)
    ));
    let x: Vec<f64> = full.nodes.clone();
    let q = variational_check(&full, &x, VariationalMode::Poincare).unwrap();
    // x is the first Hermite mode: quotient ≈ 1/γ = 1
    assert!((q - 1.0).abs() < 1e-3);
}

#[test]
fn refinement_is_stable() {
    let d = ou(1.0);
    let change = refinement_change(2000, |n| Ok(killed_gap(&d, 0.5, Side::Plus, n)?.gap)).unwrap();
    assert!(change < 5e-3);
}

#[test]
fn boundary_parsing_and_json() {
    assert_eq!("Dirichlet".parse::<Boundary>().unwrap(), Boundary::Dirichlet);
    assert!("robin".parse::<Boundary>().is_err());
    let op = build_operator(build_grid(&bm(), 50).unwrap(), (Boundary::Dirichlet, Boundary::Dirichlet));
    let json = smallest_eigenvalues(&op, 1).unwrap().to_json().unwrap();
    let back: SpectrumResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back.grid_size, 50);
}

#[test]
fn doubling_the_window_barely_moves_killed_gaps() {
    // the Neumann truncation stands in for non-exit boundaries at ±∞
    let d = ou(1.0);
    let wide = d.widened(2.0).unwrap();
    for (a, side) in [(0.5, Side::Plus), (-1.0, Side::Minus), (0.0, Side::Minus)] {
        let g = killed_gap(&d, a, side, 4000).unwrap().gap;
        let w = killed_gap(&wide, a, side, 8000).unwrap().gap;
        assert!((g - w).abs() / w < 5e-3, "a {a} {side}: {g} vs {w}");
    }
}
