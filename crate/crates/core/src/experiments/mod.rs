//! Seeded, replicated experiment drivers.
//!
//! An experiment is a pure function of its [`ExperimentConfig`]. Each
//! replication draws from a stream derived from `(master_seed, n, rep)`, runs
//! on the rayon pool, and lands in a fixed slot of the output, so reports do
//! not depend on scheduling. Failed replications stay in the report as rows
//! with an error marker.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{DivergenceConfig, Method};
use crate::error::{usage, Error, Result};
use crate::mixture::{BoxRegion, GmmDensity, MixingMeasure};
use crate::npmle::SolverConfig;
use crate::numeric::{mean, median, variance};
use crate::rng;

mod checks;
mod emit;
mod runs;

pub use checks::{evaluate_checks, CheckOutcome};
pub use emit::{emit, emit_dir, read_rows_csv, Format};
pub use runs::rerun_row;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stability,
    KlRisk,
    ChaosBc,
    Fluctuation,
    Moments,
    Polymer,
    Bracketing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Stability,
        ExperimentKind::KlRisk,
        ExperimentKind::ChaosBc,
        ExperimentKind::Fluctuation,
        ExperimentKind::Moments,
        ExperimentKind::Polymer,
        ExperimentKind::Bracketing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Stability => "stability",
            ExperimentKind::KlRisk => "kl-risk",
            ExperimentKind::ChaosBc => "chaos-bc",
            ExperimentKind::Fluctuation => "fluctuation",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Polymer => "polymer",
            ExperimentKind::Bracketing => "bracketing",
        }
    }

    /// Measured columns, in CSV order, after the key columns.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Stability => &["eps_n", "h2", "gap", "loglik", "envelope", "h2_ratio"],
            ExperimentKind::KlRisk => &["eps_n", "kl", "kl_se", "h2", "gap", "envelope", "restricted_mass"],
            ExperimentKind::ChaosBc => &["bc", "h2", "one_minus_bc", "gap", "gap_t"],
            ExperimentKind::Fluctuation => &["loglik_hat", "loglik_star", "grad_sq_hat", "grad_sq_star", "gap"],
            ExperimentKind::Moments => &["loglik_hat", "loglik_star", "diff", "m1", "m2", "gap"],
            ExperimentKind::Polymer => &["overlap", "energy"],
            ExperimentKind::Bracketing => {
                &["eps", "count", "log_count", "entropy_ratio", "measured_gap", "half_width", "in_family", "violations"]
            }
        }
    }

    fn min_reps(self) -> usize {
        match self {
            ExperimentKind::Fluctuation | ExperimentKind::Moments => 50,
            _ => 2,
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| usage(format!("unknown experiment {s:?}")))
    }
}

/// Schedule of near-optimality slacks `ε_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum EpsRule {
    Zero,
    Constant { value: f64 },
    /// `c / √n`
    InvSqrt { c: f64 },
}

impl EpsRule {
    pub fn at(self, n: usize) -> f64 {
        match self {
            EpsRule::Zero => 0.0,
            EpsRule::Constant { value } => value,
            EpsRule::InvSqrt { c } => c / (n as f64).sqrt(),
        }
    }

    fn validate(self) -> Result<()> {
        let v = match self {
            EpsRule::Zero => 0.0,
            EpsRule::Constant { value } => value,
            EpsRule::InvSqrt { c } => c,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(usage("eps_n must be a finite nonnegative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Data-generating mixing measure; `None` selects the default for `d`.
    pub f_star: Option<MixingMeasure>,
    /// Sample sizes, or polymer lengths for `polymer`. Unused by
    /// `bracketing`.
    pub n_list: Vec<usize>,
    pub d: usize,
    pub reps: usize,
    pub eps_n: EpsRule,
    /// Langevin times for `chaos-bc`, OU times for `polymer`.
    pub t_list: Vec<f64>,
    pub master_seed: u64,
    pub solver: SolverConfig,
    pub divergence: DivergenceConfig,
    /// Accuracy levels for `bracketing`.
    pub eps_list: Vec<f64>,
    /// Class parameters for `bracketing`.
    pub theta: Option<BoxRegion>,
    pub tau: f64,
    /// Evaluate the experiment's trend checks after the run.
    pub checks: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind` in dimension 1.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            f_star: None,
            n_list: vec![100, 400, 1600, 6400],
            d: 1,
            reps: 30,
            eps_n: EpsRule::Zero,
            t_list: Vec::new(),
            master_seed: 2024,
            solver: SolverConfig::default(),
            divergence: DivergenceConfig::quadrature(),
            eps_list: Vec::new(),
            theta: None,
            tau: 0.5,
            checks: false,
        };
        match kind {
            ExperimentKind::Stability => base,
            ExperimentKind::KlRisk => ExperimentConfig { divergence: DivergenceConfig::monte_carlo(200_000, 0), ..base },
            ExperimentKind::ChaosBc => ExperimentConfig { n_list: vec![200, 800, 3200], t_list: vec![0.1], ..base },
            ExperimentKind::Fluctuation => ExperimentConfig { n_list: vec![200, 400, 800, 1600, 3200], reps: 100, ..base },
            ExperimentKind::Moments => ExperimentConfig { n_list: vec![200, 800, 3200], reps: 100, ..base },
            ExperimentKind::Polymer => {
                ExperimentConfig { n_list: vec![50, 100, 200, 400], t_list: vec![0.0, 0.05, 0.2, 1.0, 50.0], reps: 200, ..base }
            }
            ExperimentKind::Bracketing => ExperimentConfig {
                n_list: Vec::new(),
                reps: 20,
                eps_list: vec![0.3, 0.1],
                theta: Some(BoxRegion::cube(1, -1.0, 1.0).expect("valid box")),
                ..base
            },
        }
    }

    /// Overlays the keys of a JSON object on the preset for `kind`. An
    /// `experiment` key, if present, must name `kind`.
    pub fn from_json(kind: ExperimentKind, overrides: &serde_json::Value) -> Result<Self> {
        let mut merged = serde_json::to_value(Self::preset(kind)).map_err(|e| usage(e.to_string()))?;
        let obj = overrides.as_object().ok_or_else(|| usage("experiment config must be a JSON object"))?;
        let target = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in obj {
            target.insert(k.clone(), v.clone());
        }
        let cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| usage(format!("experiment config: {e}")))?;
        if cfg.experiment != kind {
            return Err(usage(format!("config names experiment {}, command asked for {kind}", cfg.experiment)));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        if self.reps < kind.min_reps() {
            return Err(usage(format!("{kind} needs at least {} replications, got {}", kind.min_reps(), self.reps)));
        }
        if self.d == 0 {
            return Err(usage("d must be positive"));
        }
        if kind != ExperimentKind::Bracketing {
            if self.n_list.is_empty() || self.n_list[0] == 0 {
                return Err(usage("n_list must be nonempty with positive entries"));
            }
            if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(usage("n_list must be strictly increasing"));
            }
        }
        if let Some(m) = &self.f_star {
            if m.dim() != self.d {
                return Err(usage(format!("f_star has dimension {}, d = {}", m.dim(), self.d)));
            }
        } else if self.d > 2 && uses_f_star(kind) {
            return Err(usage("no default f_star for d > 2; set f_star"));
        }
        if self.t_list.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(usage("t_list entries must be finite and nonnegative"));
        }
        if matches!(kind, ExperimentKind::ChaosBc | ExperimentKind::Polymer) && self.t_list.is_empty() {
            return Err(usage(format!("{kind} needs a nonempty t_list")));
        }
        if kind == ExperimentKind::Bracketing {
            if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(usage("eps_list must be nonempty with entries in (0, 1)"));
            }
            let theta = self.theta.as_ref().ok_or_else(|| usage("bracketing needs theta"))?;
            if theta.dim() != self.d {
                return Err(usage("theta dimension does not match d"));
            }
            if !(self.tau > 0.0 && self.tau <= 1.0) {
                return Err(usage("tau must lie in (0, 1]"));
            }
        }
        self.eps_n.validate()?;
        self.solver.validate()
    }

    /// The data-generating density.
    pub fn f_star(&self) -> Result<GmmDensity> {
        if let Some(m) = &self.f_star {
            return Ok(GmmDensity::new(m.clone()));
        }
        default_f_star(self.d).map(GmmDensity::new)
    }
}

fn uses_f_star(kind: ExperimentKind) -> bool {
    !matches!(kind, ExperimentKind::Polymer | ExperimentKind::Bracketing)
}

/// `½δ_{−2} + ½δ_{2}` for d = 1; uniform on the corners of `[−2, 2]²` for
/// d = 2.
pub fn default_f_star(d: usize) -> Result<MixingMeasure> {
    match d {
        1 => MixingMeasure::new(&[vec![-2.0], vec![2.0]], vec![0.5, 0.5]),
        2 => MixingMeasure::uniform(2, vec![-2.0, -2.0, -2.0, 2.0, 2.0, -2.0, 2.0, 2.0]),
        _ => Err(usage(format!("no default f_star in dimension {d}"))),
    }
}

/// `(log n)^{d+1} / n`.
pub fn envelope(n: usize, d: usize) -> f64 {
    (n as f64).ln().powi(d as i32 + 1) / n as f64
}

/// One replication. `values` follow [`ExperimentKind::columns`]; a failed
/// replication has no values and an error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub d: usize,
    pub t: Option<f64>,
    pub rep: usize,
    pub seed: u64,
    pub values: Vec<Option<f64>>,
    pub error: Option<String>,
}

impl Row {
    pub fn get(&self, column: &str) -> Option<f64> {
        let k = self.experiment.columns().iter().position(|c| *c == column)?;
        self.values.get(k).copied().flatten()
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
}

impl Aggregate {
    fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let se = if xs.len() > 1 { (variance(xs) / xs.len() as f64).sqrt() } else { 0.0 };
        Some(Aggregate { mean: mean(xs), median: median(xs), std_error: se })
    }
}

/// Aggregates over the replications sharing `(n, t)` (or `eps` for
/// bracketing).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub t: Option<f64>,
    pub eps: Option<f64>,
    pub rows: usize,
    pub failed: usize,
    pub columns: BTreeMap<String, Aggregate>,
    /// Experiment-specific statistics across the group.
    pub derived: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    /// Trend statistics across groups.
    pub trends: BTreeMap<String, f64>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub crate_version: String,
    pub columns: Vec<String>,
    pub assumptions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<Row>,
    pub summary: Summary,
    pub metadata: Metadata,
}

impl ExperimentReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    pub fn group(&self, n: usize, t: Option<f64>) -> Option<&GroupSummary> {
        self.summary.groups.iter().find(|g| g.n == n && g.t == t)
    }

    pub fn checks_passed(&self) -> bool {
        self.summary.checks.iter().all(|c| c.passed)
    }
}

/// Key columns shared by every experiment.
pub const KEY_COLUMNS: [&str; 6] = ["experiment", "n", "d", "t", "rep", "seed"];

/// Full CSV header for `kind`.
pub fn header(kind: ExperimentKind) -> Vec<String> {
    KEY_COLUMNS
        .iter()
        .chain(kind.columns())
        .chain(std::iter::once(&"error"))
        .map(|s| s.to_string())
        .collect()
}

/// Seed of replication `rep` at grid position `n`.
pub fn row_seed(master: u64, n: usize, rep: usize) -> u64 {
    rng::derive_seed_path(master, &[n as u64, rep as u64])
}

/// Reads `MIXMECH_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("MIXMECH_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(usage(format!("MIXMECH_THREADS = {s:?} is not a positive integer"))),
        },
    }
}

/// Quadrature where available, otherwise Monte Carlo with a row-derived
/// seed.
fn divergence_config(cfg: &ExperimentConfig, seed: u64) -> DivergenceConfig {
    let mut c = cfg.divergence.clone();
    if c.method == Method::Quadrature && cfg.d > 2 {
        c.method = Method::MonteCarlo;
    }
    c.seed = rng::derive_seed(seed, 0xD1);
    c
}

/// Quadrature for d ≤ 2 whatever the configured method.
fn exact_where_possible(cfg: &ExperimentConfig, seed: u64) -> DivergenceConfig {
    let mut c = divergence_config(cfg, seed);
    if cfg.d <= 2 {
        c.method = Method::Quadrature;
    }
    c
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let tasks = runs::grid(cfg);
    let rows: Vec<Row> = tasks.into_par_iter().map(|task| runs::run_task(cfg, task)).collect();
    let mut report = ExperimentReport {
        summary: runs::summarize(cfg, &rows),
        rows,
        metadata: Metadata {
            config: cfg.clone(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            columns: header(cfg.experiment),
            assumptions: assumptions(cfg.experiment),
        },
    };
    if cfg.checks {
        report.summary.checks = evaluate_checks(&report);
    }
    Ok(report)
}

fn require(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(usage(format!("config is for {}, not {kind}", cfg.experiment)));
    }
    Ok(())
}

pub fn run_stability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require(cfg, ExperimentKind::Stability)?;
    run(cfg)
}

pub fn run_kl_risk(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require(cfg, ExperimentKind::KlRisk)?;
    run(cfg)
}

pub fn run_chaos_bc(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require(cfg, ExperimentKind::ChaosBc)?;
    run(cfg)
}

pub fn run_fluctuation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require(cfg, ExperimentKind::Fluctuation)?;
    run(cfg)
}

pub fn run_moments(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    require(cfg, ExperimentKind::Moments)?;
    run(cfg)
}

fn assumptions(kind: ExperimentKind) -> Vec<String> {
    let mut out = vec!["gap is the solver certificate and stands in for the likelihood slack".to_string()];
    match kind {
        ExperimentKind::Fluctuation | ExperimentKind::Moments => {
            out.push("gradient of the fitted log-likelihood taken by the envelope formula at the fitted optimum".into());
            out.push("variance estimated across independent replications".into());
        }
        ExperimentKind::ChaosBc => out.push("data evolved by Langevin dynamics of f_star, then refit".into()),
        ExperimentKind::Bracketing => {
            out.push("desk-scale bracket constants; the proof constants give families beyond any cap".into())
        }
        _ => {}
    }
    out
}
