//! Euler–Maruyama simulation of hitting times, used as an independent check
//! on the moment and spectral routes.
//!
//! Path `i` draws from the ChaCha stream `i` of the base seed, so results do
//! not depend on the number of worker threads and adding paths leaves the
//! earlier ones unchanged.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, Side};
use crate::serde_float;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step: f64,
    pub t_max: f64,
    pub paths: usize,
    pub seed: u64,
    pub start: f64,
    pub target: f64,
    /// Side of `target` the paths start on.
    pub side: Side,
    /// Also detect crossings inside a step through the Brownian-bridge
    /// crossing probability, not only sign changes at grid times.
    pub bridge: bool,
}

impl SimConfig {
    pub fn new(start: f64, target: f64, paths: usize, seed: u64) -> Self {
        SimConfig {
            step: 1e-3,
            t_max: 100.0,
            paths,
            seed,
            start,
            target,
            side: if start >= target { Side::Plus } else { Side::Minus },
            bridge: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.paths == 0 {
            return Err(Error::Config("at least one path is required".into()));
        }
        let ok = match self.side {
            Side::Plus => self.start >= self.target,
            Side::Minus => self.start <= self.target,
        };
        if !ok {
            return Err(Error::Config(format!(
                "start {} is not on the {} side of {}",
                self.start, self.side, self.target
            )));
        }
        Ok(())
    }
}

/// Hitting times, capped at `t_max` for censored paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSampleSet {
    pub samples: Vec<f64>,
    pub censored: Vec<bool>,
    pub censored_count: usize,
    pub config: SimConfig,
}

impl HittingSampleSet {
    pub fn from_samples(samples: Vec<f64>, censored: Vec<bool>, config: SimConfig) -> Result<Self> {
        if samples.len() != censored.len() {
            return Err(Error::Config("samples and censoring flags differ in length".into()));
        }
        let censored_count = censored.iter().filter(|c| **c).count();
        Ok(HittingSampleSet {
            samples,
            censored,
            censored_count,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample mean and its standard error.
    pub fn mean(&self) -> (f64, f64) {
        mean_and_error(self.samples.iter().copied())
    }

    /// CSV with columns `path_index, t_hit, censored`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path_index", "t_hit", "censored"])?;
        for (i, (t, c)) in self.samples.iter().zip(&self.censored).enumerate() {
            w.write_record([i.to_string(), format!("{t:e}"), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_and_error(it: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = it.clone().count() as f64;
    let mean = it.clone().sum::<f64>() / n;
    let var = it.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Simulates `T_a` for `config.paths` independent paths.
pub fn simulate_hitting(config: &SimConfig, spec: &DiffusionSpec) -> Result<HittingSampleSet> {
    config.validate()?;
    let (drift, sigma) = spec
        .coefficients()
        .ok_or_else(|| Error::Config("simulation needs drift and sigma coefficients".into()))?;
    let w = spec.window;
    for (name, v) in [("target", config.target), ("start", config.start)] {
        if !w.contains(v) {
            return Err(Error::Config(format!("{name} {v} outside the window [{}, {}]", w.lo, w.hi)));
        }
    }
    let c = *config;
    let max_steps = (c.t_max / c.step).ceil() as u64;
    let sqrt_h = c.step.sqrt();
    let results: Vec<(f64, bool)> = (0..c.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            rng.set_stream(i as u64);
            let mut x = c.start;
            let mut d0 = x - c.target;
            if d0 == 0.0 {
                return (0.0, false);
            }
            for n in 0..max_steps {
                let s = sigma(x);
                let z: f64 = rng.sample(StandardNormal);
                let next = x + drift(x) * c.step + s * sqrt_h * z;
                let d1 = next - c.target;
                let t0 = n as f64 * c.step;
                if d1 == 0.0 || (d0 > 0.0) != (d1 > 0.0) {
                    let frac = d0 / (d0 - d1);
                    return ((t0 + frac * c.step).min(c.t_max), false);
                }
                if c.bridge {
                    let e = 2.0 * d0 * d1 / (s * s * c.step);
                    // the bridge crossing probability is below 1e-17 beyond this
                    if e < 40.0 {
                        let u: f64 = rng.random();
                        if u < (-e).exp() {
                            let frac = d0.abs() / (d0.abs() + d1.abs());
                            return ((t0 + frac * c.step).min(c.t_max), false);
                        }
                    }
                }
                x = next;
                d0 = d1;
            }
            (c.t_max, true)
        })
        .collect();
    let (samples, censored) = results.into_iter().unzip();
    HittingSampleSet::from_samples(samples, censored, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    #[serde(with = "serde_float")]
    pub estimate: f64,
    #[serde(with = "serde_float")]
    pub std_error: f64,
    /// Some samples were censored, so the mean underestimates `E e^{λT}`.
    pub lower_bound: bool,
}

/// Sample mean of `e^{λ T}`.
pub fn empirical_exp_moment(samples: &HittingSampleSet, lambda: f64) -> ExpMoment {
    if lambda == 0.0 {
        return ExpMoment {
            estimate: 1.0,
            std_error: 0.0,
            lower_bound: samples.censored_count > 0,
        };
    }
    let (estimate, std_error) = mean_and_error(samples.samples.iter().map(|t| (lambda * t).exp()));
    ExpMoment {
        estimate,
        std_error,
        lower_bound: samples.censored_count > 0,
    }
}

/// Exponential decay rate of the empirical survival function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    pub rate: f64,
    /// Fit window `[q50, q95]` of the sample distribution.
    pub fit_start: f64,
    pub fit_end: f64,
    pub points: usize,
    /// Root-mean-square residual of the log-survival fit.
    pub rms_residual: f64,
}

/// Least-squares slope of `log P(T > t)` on `[q50, q95]`, negated.
pub fn tail_rate(samples: &HittingSampleSet) -> Result<TailRate> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::InsufficientTail(format!("only {n} samples")));
    }
    let mut sorted = samples.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| sorted[((p * (n - 1) as f64).round() as usize).min(n - 1)];
    let (start, end) = (q(0.5), q(0.95));
    let beyond = samples
        .samples
        .iter()
        .zip(&samples.censored)
        .filter(|(t, c)| !**c && **t >= start)
        .count();
    if beyond * 10 < n {
        return Err(Error::InsufficientTail(format!(
            "{beyond} of {n} uncensored samples beyond t = {start}"
        )));
    }
    if !(end > start) {
        return Err(Error::InsufficientTail("degenerate fit window".into()));
    }
    let t_cap = samples.config.t_max;
    let k = 200usize;
    let mut ts = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for j in 0..k {
        let t = start + (end - start) * j as f64 / (k - 1) as f64;
        if t >= t_cap {
            break;
        }
        let above = n - sorted.partition_point(|&v| v <= t);
        if above == 0 {
            break;
        }
        ts.push(t);
        ys.push((above as f64 / n as f64).ln());
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientTail("fewer than three survival points".into()));
    }
    let m = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - (ym + slope * (t - tm))).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(TailRate {
        rate: -slope,
        fit_start: start,
        fit_end: end,
        points: ts.len(),
        rms_residual: rms,
    })
}

#[cfg(test)]
mod tests;
