use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::Window;

fn ou_spec() -> DiffusionSpec {
    DiffusionSpec::ornstein_uhlenbeck(1.0, Window::new(-8.0, 8.0))
}

#[test]
fn same_seed_same_samples() {
    let cfg = SimConfig::new(1.0, 0.0, 200, 7);
    let a = simulate_hitting(&cfg, &ou_spec()).unwrap();
    let b = simulate_hitting(&cfg, &ou_spec()).unwrap();
    assert_eq!(a, b);
    let more = simulate_hitting(&SimConfig { paths: 300, ..cfg }, &ou_spec()).unwrap();
    assert_eq!(&more.samples[..200], &a.samples[..]);
    let other = simulate_hitting(&SimConfig { seed: 8, ..cfg }, &ou_spec()).unwrap();
    assert_ne!(other.samples, a.samples);
}

#[test]
fn start_at_target_hits_immediately() {
    let s = simulate_hitting(&SimConfig::new(0.0, 0.0, 50, 1), &ou_spec()).unwrap();
    assert!(s.samples.iter().all(|t| *t < 1e-3));
}

#[test]
fn ou_mean_hitting_time() {
    // E_1 T_0 = 0.9019080126528065
    let cfg = SimConfig {
        step: 1e-3,
        ..SimConfig::new(1.0, 0.0, 20_000, 11)
    };
    let s = simulate_hitting(&cfg, &ou_spec()).unwrap();
    let (mean, se) = s.mean();
    assert!((mean - 0.901_908_012_652_806_5).abs() < 3.0 * se, "{mean} ± {se}");
    assert_eq!(s.censored_count, 0);
}

#[test]
fn exp_moment_semantics() {
    let cfg = SimConfig {
        t_max: 0.5,
        ..SimConfig::new(1.0, 0.0, 500, 3)
    };
    let s = simulate_hitting(&cfg, &ou_spec()).unwrap();
    assert!(s.censored_count > 0);
    let e = empirical_exp_moment(&s, 0.0);
    assert_eq!(e.estimate, 1.0);
    assert!(empirical_exp_moment(&s, 0.5).lower_bound);
    assert!(s.samples.iter().all(|t| *t > 0.0 && *t <= 0.5));
}

#[test]
fn exp_moment_below_gap_is_stable() {
    let spec = ou_spec();
    let small = simulate_hitting(&SimConfig { step: 2e-3, ..SimConfig::new(1.0, 0.0, 4000, 5) }, &spec).unwrap();
    let large = simulate_hitting(&SimConfig { step: 2e-3, ..SimConfig::new(1.0, 0.0, 8000, 5) }, &spec).unwrap();
    let (a, b) = (empirical_exp_moment(&small, 0.5), empirical_exp_moment(&large, 0.5));
    assert!(!a.lower_bound);
    assert!((a.estimate - b.estimate).abs() < 3.0 * a.std_error.hypot(b.std_error));
}

fn synthetic(rate: f64, n: usize) -> HittingSampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let samples: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() / rate).collect();
    HittingSampleSet::from_samples(samples, vec![false; n], SimConfig::new(1.0, 0.0, n, 42)).unwrap()
}

#[test]
fn tail_rate_of_exponential_samples() {
    let r = tail_rate(&synthetic(2.0, 100_000)).unwrap();
    assert!((r.rate - 2.0).abs() < 0.1, "{}", r.rate);
    assert!(r.fit_start < r.fit_end);
}

#[test]
fn all_censored_is_insufficient() {
    let cfg = SimConfig::new(1.0, 0.0, 100, 1);
    let set = HittingSampleSet::from_samples(vec![cfg.t_max; 100], vec![true; 100], cfg).unwrap();
    assert!(matches!(tail_rate(&set), Err(Error::InsufficientTail(_))));
}

#[test]
fn validation() {
    let spec = ou_spec();
    assert!(simulate_hitting(&SimConfig { step: 0.0, ..SimConfig::new(1.0, 0.0, 10, 1) }, &spec).is_err());
    assert!(simulate_hitting(&SimConfig::new(1.0, 9.0, 10, 1), &spec).is_err());
    assert!(simulate_hitting(&SimConfig { side: Side::Minus, ..SimConfig::new(1.0, 0.0, 10, 1) }, &spec).is_err());
    let dens = DiffusionSpec::brownian_surrogate(Window::new(0.0, 1.0));
    assert!(matches!(simulate_hitting(&SimConfig::new(0.5, 0.2, 10, 1), &dens), Err(Error::Config(_))));
}

#[test]
fn csv_columns() {
    let s = simulate_hitting(&SimConfig::new(1.0, 0.0, 5, 2), &ou_spec()).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("path_index,t_hit,censored\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn step_halving_moves_mean_within_noise() {
    let spec = ou_spec();
    let coarse = simulate_hitting(&SimConfig { step: 2e-3, ..SimConfig::new(1.0, 0.0, 20_000, 9) }, &spec).unwrap();
    let fine = simulate_hitting(&SimConfig { step: 1e-3, ..SimConfig::new(1.0, 0.0, 20_000, 10) }, &spec).unwrap();
    let ((a, sa), (b, sb)) = (coarse.mean(), fine.mean());
    assert!((a - b).abs() < 3.0 * sa.hypot(sb), "{a} vs {b}");
}
