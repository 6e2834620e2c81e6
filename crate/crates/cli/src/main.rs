//! `hitgap`: analysis, spectrum, simulation and sandwich checks for
//! one-dimensional diffusions described by a TOML config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod sandwich;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hitgap::config::RunConfig;
use hitgap::constants::{analyze_detailed, b_product, default_anchors};
use hitgap::montecarlo::{empirical_exp_moment, simulate_hitting, tail_rate};
use hitgap::spectral::{build_grid, build_grid_on, build_operator, smallest_eigenvalues, Boundary, SpectrumKind};
use hitgap::{Error, Result, Side};
use serde_json::json;

use output::{Outcome, RunManifest};

#[derive(Parser)]
#[command(name = "hitgap", version, about = "Hitting-time moments, Hardy constants and spectral gaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// B constants, gaps and moment estimates at every anchor, with all sandwich checks.
    Analyze(AnalyzeArgs),
    /// Smallest eigenvalues of the discretized generator.
    Spectrum(SpectrumArgs),
    /// Euler–Maruyama hitting-time samples.
    Simulate(SimulateArgs),
    /// Runs the built-in matrix of reference diffusions.
    SandwichCheck(SandwichArgs),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "hitgap-out")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated anchors, overriding the config.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    anchors: Option<Vec<f64>>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Boundary condition at the window edges (at the far edge when killed).
    #[arg(long, default_value = "neumann")]
    bc: Boundary,
    #[arg(long)]
    grid_size: Option<usize>,
    /// Kill at this point; without it the whole window is used.
    #[arg(long, allow_negative_numbers = true)]
    anchor: Option<f64>,
    #[arg(long, default_value = "plus")]
    side: Side,
    /// Number of eigenvalues.
    #[arg(long, default_value_t = 4)]
    count: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Also report the empirical `E e^{λT}` at this λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Disable the Brownian-bridge crossing test inside steps.
    #[arg(long)]
    no_bridge: bool,
}

#[derive(Args)]
struct SandwichArgs {
    #[arg(short, long, default_value = "hitgap-out")]
    out: PathBuf,
    #[arg(long, default_value_t = hitgap::spectral::DEFAULT_GRID_SIZE)]
    grid_size: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::SandwichCheck(a) => sandwich::run(&a.out, a.grid_size),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HITGAP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("HITGAP_THREADS must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(Error::Config("HITGAP_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("analyze", Some(&args.common.config), &args.common.out)?;
    let cfg = RunConfig::load(&args.common.config)?;
    let d = cfg.diffusion()?;
    manifest.stage("model");
    let mut opts = cfg.analysis_options(&d);
    if let Some(a) = args.anchors {
        opts.anchors = Some(a);
    }
    opts.grid_size = args.grid_size.unwrap_or(opts.grid_size);
    opts.depth = args.depth.unwrap_or(opts.depth);
    let anchors = opts.anchors.clone().unwrap_or_else(|| default_anchors(&d));
    opts.anchors = Some(anchors.clone());
    let out = manifest.resolve(json!({
        "anchors": anchors,
        "grid_size": opts.grid_size,
        "depth": opts.depth,
        "window": cfg.window,
        "tolerances": cfg.tolerances,
    }))?;

    let (report, inputs) = analyze_detailed(&d, &opts)?;
    manifest.stage("analyze");

    out.json("report.json", &report)?;
    out.csv("report.csv", |w| report.write_csv(w))?;
    out.csv("b_curve.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["a", "side", "x", "product"])?;
        let win = d.window();
        for &a in &anchors {
            for side in [Side::Plus, Side::Minus] {
                let edge = if side == Side::Plus { win.hi } else { win.lo };
                for k in 1..=200 {
                    let x = a + (edge - a) * k as f64 / 200.0;
                    let p = b_product(&d, a, side, x);
                    c.write_record([format!("{a:e}"), side.to_string(), format!("{x:e}"), format!("{p:e}")])?;
                }
            }
        }
        c.flush()?;
        Ok(())
    })?;
    out.csv("ratios.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["a", "side", "x", "n", "ratio"])?;
        for inp in &inputs {
            for est in [&inp.lambda_plus, &inp.lambda_minus].into_iter().flatten() {
                for p in &est.points {
                    for (n, r) in p.ratios.iter().enumerate() {
                        c.write_record([
                            format!("{:e}", est.a),
                            est.side.to_string(),
                            format!("{:e}", p.x),
                            (n + 1).to_string(),
                            format!("{r:e}"),
                        ])?;
                    }
                }
            }
        }
        c.flush()?;
        Ok(())
    })?;
    manifest.write(&out)?;

    let summary = json!({
        "passed": report.passed(),
        "violations": report.violations,
        "warnings": report.warnings,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Violations })
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("spectrum", Some(&args.common.config), &args.common.out)?;
    let cfg = RunConfig::load(&args.common.config)?;
    let d = cfg.diffusion()?;
    let n = args.grid_size.unwrap_or(cfg.numerics.grid_size);
    manifest.stage("model");
    let out = manifest.resolve(json!({
        "bc": args.bc,
        "grid_size": n,
        "anchor": args.anchor,
        "side": args.anchor.map(|_| args.side),
        "count": args.count,
        "window": cfg.window,
        "tolerances": cfg.tolerances,
    }))?;

    d.require_certificate()?;
    let result = match args.anchor {
        None => {
            let op = build_operator(build_grid(&d, n)?, (args.bc, args.bc));
            let mut r = smallest_eigenvalues(&op, args.count.max(2))?;
            if args.bc == Boundary::Neumann {
                r.kind = SpectrumKind::Full;
                r.gap = r.eigenvalues[1];
            }
            r
        }
        Some(a) => {
            let w = d.window();
            if !(w.lo < a && a < w.hi) {
                return Err(Error::Config(format!("anchor {a} not inside the window [{}, {}]", w.lo, w.hi)));
            }
            let (grid, bc) = match args.side {
                Side::Plus => (build_grid_on(&d, a, w.hi, n)?, (Boundary::Dirichlet, args.bc)),
                Side::Minus => (build_grid_on(&d, w.lo, a, n)?, (args.bc, Boundary::Dirichlet)),
            };
            let mut r = smallest_eigenvalues(&build_operator(grid, bc), args.count)?;
            r.kind = SpectrumKind::Killed { a, side: args.side };
            r
        }
    };
    manifest.stage("spectrum");
    out.json("spectrum.json", &result)?;
    out.csv("eigenvectors.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string()];
        header.extend((0..result.eigenvectors.len()).map(|k| format!("v{k}")));
        c.write_record(&header)?;
        for (i, x) in result.nodes.iter().enumerate() {
            let mut row = vec![format!("{x:e}")];
            row.extend(result.eigenvectors.iter().map(|v| format!("{:e}", v[i])));
            c.write_record(&row)?;
        }
        c.flush()?;
        Ok(())
    })?;
    manifest.write(&out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "gap": result.gap, "eigenvalues": result.eigenvalues }))?
    );
    Ok(Outcome::Pass)
}

fn cmd_simulate(args: SimulateArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("simulate", Some(&args.common.config), &args.common.out)?;
    let rc = RunConfig::load(&args.common.config)?;
    let spec = rc.spec()?;
    let mut sim = rc.sim_config();
    sim.paths = args.paths.unwrap_or(sim.paths);
    sim.seed = args.seed.unwrap_or(sim.seed);
    sim.step = args.step.unwrap_or(sim.step);
    sim.t_max = args.tmax.unwrap_or(sim.t_max);
    sim.target = args.to.unwrap_or(sim.target);
    sim.start = args.from.unwrap_or(if args.to.is_some() { sim.target + 1.0 } else { sim.start });
    sim.side = if sim.start >= sim.target { Side::Plus } else { Side::Minus };
    sim.bridge = sim.bridge && !args.no_bridge;
    if let Some(l) = args.lambda {
        if !(l >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {l}")));
        }
    }
    let out = manifest.resolve(json!({ "simulation": sim, "lambda": args.lambda, "window": rc.window }))?;

    let samples = simulate_hitting(&sim, &spec)?;
    manifest.stage("simulate");
    let (mean, std_error) = samples.mean();
    let tail = tail_rate(&samples);
    let summary = json!({
        "paths": samples.len(),
        "censored": samples.censored_count,
        "mean": mean,
        "std_error": std_error,
        "tail_rate": tail.as_ref().ok(),
        "tail_error": tail.as_ref().err().map(|e| e.to_string()),
        "exp_moment": args.lambda.map(|l| json!({ "lambda": l, "moment": empirical_exp_moment(&samples, l) })),
        "config": sim,
    });
    out.csv("samples.csv", |w| samples.write_csv(w))?;
    out.csv("survival.csv", |w| {
        let mut sorted = samples.samples.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t", "survival"])?;
        let points = 400.min(n);
        for k in 0..points {
            let i = if points > 1 { k * (n - 1) / (points - 1) } else { 0 };
            let t = sorted[i];
            let above = n - sorted.partition_point(|&v| v <= t);
            c.write_record([format!("{t:e}"), format!("{:e}", above as f64 / n as f64)])?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.json("summary.json", &summary)?;
    manifest.write(&out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(Outcome::Pass)
}
