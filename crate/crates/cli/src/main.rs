//! `mixmech` command-line interface.
//!
//! Exit status: 0 on success, 1 on error, 2 when a configured experiment
//! check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mixmech::discretize::{bracketing_stats, DiscretizeConfig, DEFAULT_CAP};
use mixmech::divergence::{divergence, DivergenceConfig, Metric};
use mixmech::experiments::{emit_dir, run, threads_from_env, ExperimentConfig, ExperimentKind};
use mixmech::io::{read_dataset, read_json, read_measure, write_dataset, write_json};
use mixmech::langevin::{evolve, LangevinConfig};
use mixmech::npmle::{fit, Algorithm, GridSpec, Restriction, SolverConfig};
use mixmech::polymer::chaos_stats;
use mixmech::{BoxRegion, GmmDensity};

#[derive(Parser)]
#[command(name = "mixmech", version, about = "NPMLE for Gaussian location mixtures, with stability and chaos diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    H2,
    Kl,
    Bc,
    Tv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Quad,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Em,
    Vd,
    Hybrid,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a mixture.
    Sample {
        #[arg(long)]
        fstar: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Divergence between two mixtures, printed as JSON.
    Divergence {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value = "quad")]
        method: MethodArg,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the NPMLE to a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// `auto` or `lo1,hi1[,lo2,hi2...]:spacing`
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value = "hybrid")]
        alg: AlgArg,
        /// Relative log-likelihood change that ends EM sweeps.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-4)]
        gap_tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// Restriction box `lo1,hi1[,...]`; requires --tau.
        #[arg(long, allow_hyphen_values = true, requires = "tau")]
        theta: Option<String>,
        #[arg(long, requires = "theta")]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a dataset by Langevin dynamics of f*.
    Langevin {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fstar: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground-state overlap and energy variance of the Gaussian polymer.
    Polymer {
        #[arg(long)]
        n: usize,
        /// Comma-separated OU times.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the desk-scale bracket family and check coverage.
    Bracketing {
        /// `lo,hi` per axis, or one pair used for every axis.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated experiment; writes rows.csv and summary.json.
    Experiment {
        name: String,
        /// JSON overrides of the experiment's preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
}

fn density(path: &Path) -> Result<GmmDensity> {
    Ok(GmmDensity::new(read_measure(path)?))
}

fn theta_box(s: &str, dim: usize) -> Result<BoxRegion> {
    let b = BoxRegion::parse(s)?;
    if b.dim() == dim {
        Ok(b)
    } else if b.dim() == 1 {
        Ok(BoxRegion::cube(dim, b.lo[0], b.hi[0])?)
    } else {
        bail!("theta has dimension {}, expected {dim}", b.dim())
    }
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Sample { fstar, n, seed, out } => {
            let data = density(&fstar)?.sample(n, seed)?;
            write_dataset(&out, &data)?;
        }
        Command::Divergence { f, g, metric, method, samples, seed } => {
            let metric = match metric {
                MetricArg::H2 => Metric::H2,
                MetricArg::Kl => Metric::Kl,
                MetricArg::Bc => Metric::Bc,
                MetricArg::Tv => Metric::Tv,
            };
            let cfg = match method {
                MethodArg::Quad => DivergenceConfig::quadrature(),
                MethodArg::Mc => DivergenceConfig::monte_carlo(samples, seed),
            };
            let est = divergence(metric, &density(&f)?, &density(&g)?, &cfg)?;
            println!("{}", serde_json::to_string(&est)?);
        }
        Command::Fit { data, grid, alg, tol, gap_tol, max_iters, theta, tau, out } => {
            let data = read_dataset(&data)?;
            let restriction = match (theta, tau) {
                (Some(t), Some(tau)) => Some(Restriction { theta: theta_box(&t, data.dim())?, tau }),
                _ => None,
            };
            let cfg = SolverConfig {
                grid: GridSpec::parse(&grid)?,
                max_iters,
                rel_tol: tol,
                gap_tol,
                restriction,
                algorithm: match alg {
                    AlgArg::Em => Algorithm::Em,
                    AlgArg::Vd => Algorithm::VertexDirection,
                    AlgArg::Hybrid => Algorithm::Hybrid,
                },
            };
            let res = fit(&data, &cfg)?;
            write_json(&out, &res)?;
        }
        Command::Langevin { data, fstar, t, dt, seed, out } => {
            let data = read_dataset(&data)?;
            let moved = evolve(&data, &density(&fstar)?, &LangevinConfig { t_final: t, dt, seed })?;
            write_dataset(&out, &moved)?;
        }
        Command::Polymer { n, t, reps, seed, out } => {
            let rows = chaos_stats(n, &t, reps, seed)?;
            let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Command::Bracketing { theta, tau, eps, dim, draws, seed, cap, out } => {
            let theta = theta_box(&theta, dim)?;
            let cfg = DiscretizeConfig { cap, ..DiscretizeConfig::desk(eps, &theta) };
            let stats = bracketing_stats(&theta, tau, &cfg, draws, seed)?;
            write_json(&out, &stats)?;
        }
        Command::Experiment { name, config, out_dir } => {
            let kind: ExperimentKind = name.parse()?;
            let overrides = match config {
                Some(p) => read_json::<serde_json::Value>(&p)?,
                None => serde_json::json!({}),
            };
            let cfg = ExperimentConfig::from_json(kind, &overrides)?;
            let report = run(&cfg)?;
            emit_dir(&report, &out_dir)?;
            for c in &report.summary.checks {
                eprintln!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.checks_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = threads_from_env().and_then(|t| {
        if let Some(k) = t {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| mixmech::Error::Usage(format!("thread pool: {e}")))?;
        }
        Ok(())
    });
    match threads.map_err(anyhow::Error::from).and_then(|_| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
