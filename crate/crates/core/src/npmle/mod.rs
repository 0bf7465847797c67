//! Nonparametric maximum likelihood over Gaussian location mixtures.
//!
//! The estimator maximizes the empirical log-likelihood
//! `L_n(f) = (1/n) Σ log f(X_i)` over all mixing measures. The problem is
//! concave in the mixing measure, and its first-order condition is explicit:
//! with
//!
//! ```text
//! D(θ) = (1/n) Σ_i φ(X_i − θ) / f(X_i),
//! ```
//!
//! a measure is optimal iff `D(θ) ≤ 1` everywhere, with equality on its
//! support. Concavity also gives `L_n(μ') ≤ L_n(μ) + sup D − 1` for every
//! `μ'`, so `max(0, sup_grid D − 1)` certifies how far a fit is from the best
//! measure supported on the probe grid.
//!
//! Three solvers are offered: EM on a fixed grid, a vertex-direction method
//! (add the atom maximizing `D`, then reweight), and a hybrid that polishes a
//! vertex-direction fit with EM sweeps.

mod grid;
mod kernel;
mod nnls;
mod perturb;

use serde::{Deserialize, Serialize};

pub use grid::{auto_points_per_axis, build_grid, AtomGrid, GridSpec};
pub use perturb::near_optimal_perturb;

use crate::error::{usage, Error, Result};
use crate::mixture::{restrict_mass, BoxRegion, Dataset, GmmDensity, MixingMeasure};
use crate::numeric::{gauss_log_norm, sq_dist};
use kernel::Kernel;

/// Atoms lighter than this are dropped after each reweighting.
pub const DROP_THRESHOLD: f64 = 1e-10;
/// Golden-section steps per coordinate when refining a grid argmax of `D`.
pub const REFINE_STEPS: usize = 20;
const MAX_INNER: usize = 5000;
/// Newton steps per reweighting.
const MAX_NEWTON: usize = 200;
const CACHE_ENTRIES: usize = 25_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Em,
    VertexDirection,
    Hybrid,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Algorithm::Em),
            "vd" | "vertex-direction" => Ok(Algorithm::VertexDirection),
            "hybrid" => Ok(Algorithm::Hybrid),
            _ => Err(usage(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Mass constraint `μ(Θ) ≥ τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub theta: BoxRegion,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub max_iters: usize,
    /// Relative log-likelihood change that ends EM sweeps.
    pub rel_tol: f64,
    /// Certificate value that ends vertex-direction iterations.
    pub gap_tol: f64,
    pub restriction: Option<Restriction>,
    pub algorithm: Algorithm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid: GridSpec::Auto,
            max_iters: 500,
            rel_tol: 1e-10,
            gap_tol: 1e-4,
            restriction: None,
            algorithm: Algorithm::Hybrid,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.gap_tol > 0.0) {
            return Err(usage("rel_tol and gap_tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(usage("max_iters must be at least 1"));
        }
        if let Some(r) = &self.restriction {
            if !(r.tau > 0.0 && r.tau <= 1.0) {
                return Err(usage(format!("tau = {} is outside (0, 1]", r.tau)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub measure: MixingMeasure,
    pub loglik: f64,
    /// Upper bound on how far `loglik` is below the best value attainable
    /// on the probe grid.
    pub gap: f64,
    pub iters: usize,
    #[serde(skip_serializing, default)]
    pub trace: Vec<f64>,
}

impl SolverResult {
    pub fn density(&self) -> GmmDensity {
        GmmDensity::new(self.measure.clone())
    }
}

fn check_dims(f_dim: usize, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(usage("dataset is empty"));
    }
    if f_dim != data.dim() {
        return Err(usage(format!("density has dimension {f_dim}, data has {}", data.dim())));
    }
    Ok(())
}

/// `L_n(f) = (1/n) Σ_i log f(X_i)`.
pub fn loglik(f: &GmmDensity, data: &Dataset) -> Result<f64> {
    check_dims(f.dim(), data)?;
    Ok(data.points().map(|x| f.ln_f(x)).sum::<f64>() / data.len() as f64)
}

/// One EM update of the weights with atoms held fixed.
pub fn em_step(mu: &MixingMeasure, data: &Dataset) -> Result<MixingMeasure> {
    check_dims(mu.dim(), data)?;
    let kern = Kernel::new(data, mu.flat_atoms());
    let (w, _) = kern.em_update(mu.weights());
    MixingMeasure::normalized(mu.dim(), mu.flat_atoms().to_vec(), w)
}

/// `D(θ)` at every probe point for the mixture `mu`.
pub fn directional_derivative(mu: &MixingMeasure, data: &Dataset, probe: &AtomGrid) -> Result<Vec<f64>> {
    check_dims(mu.dim(), data)?;
    if probe.dim != mu.dim() {
        return Err(usage("probe grid dimension does not match"));
    }
    let f = GmmDensity::new(mu.clone());
    let log_f: Vec<f64> = data.points().map(|x| f.ln_f(x)).collect();
    Ok(Probe::new(data, probe).directional(data, &log_f))
}

/// `max(0, sup_probe D(θ) − 1)`. Zero certifies optimality among measures
/// supported on the probe grid.
pub fn optimality_certificate(mu: &MixingMeasure, data: &Dataset, probe: &AtomGrid) -> Result<f64> {
    if probe.is_empty() {
        return Err(usage("probe grid is empty"));
    }
    let d = directional_derivative(mu, data, probe)?;
    Ok(d.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1.0) - 1.0)
}

/// Directional derivative on a probe grid, with the kernel cached when it
/// fits in memory.
struct Probe<'a> {
    grid: &'a AtomGrid,
    cached: Option<Kernel>,
}

impl<'a> Probe<'a> {
    fn new(data: &Dataset, grid: &'a AtomGrid) -> Self {
        let cached = (data.len() * grid.len() <= CACHE_ENTRIES).then(|| Kernel::new(data, &grid.points));
        Probe { grid, cached }
    }

    fn directional(&self, data: &Dataset, log_f: &[f64]) -> Vec<f64> {
        match &self.cached {
            Some(k) => k.directional_given(log_f),
            None => self.grid.iter().map(|t| directional_at(data, log_f, t)).collect(),
        }
    }
}

fn directional_at(data: &Dataset, log_f: &[f64], theta: &[f64]) -> f64 {
    let c = gauss_log_norm(data.dim());
    let s: f64 = data
        .points()
        .zip(log_f)
        .map(|(x, lf)| (c - 0.5 * sq_dist(x, theta) - lf).min(690.0).exp())
        .sum();
    s / data.len() as f64
}

/// Index of the maximum, lowest index on ties.
fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Certificate from directional derivatives `dk` at `points`.
///
/// Unrestricted: `max(0, sup D − 1)`. Under a restriction the competitors
/// are measures with mass at least `tau` in `theta`, and concavity bounds
/// their advantage by `tau·sup_theta D + (1 − tau)·sup D − 1`.
fn gap_from(dk: &[f64], points: &[f64], dim: usize, restriction: Option<&Restriction>) -> f64 {
    let sup = dk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound = match restriction {
        None => sup,
        Some(r) => {
            let sup_in = dk
                .iter()
                .zip(points.chunks_exact(dim))
                .filter(|(_, p)| r.theta.contains(p))
                .map(|(d, _)| *d)
                .fold(f64::NEG_INFINITY, f64::max);
            if sup_in.is_finite() {
                r.tau * sup_in + (1.0 - r.tau) * sup
            } else {
                sup
            }
        }
    };
    bound.max(1.0) - 1.0
}

/// Rescales inside/outside masses so that at least `tau` sits in `theta`.
/// Returns false when no atom lies in `theta`.
fn project_restriction(atoms: &[f64], dim: usize, w: &mut [f64], r: &Restriction) -> bool {
    let inside: Vec<bool> = atoms.chunks_exact(dim).map(|a| r.theta.contains(a)).collect();
    let s: f64 = w.iter().zip(&inside).filter(|(_, i)| **i).map(|(w, _)| w).sum();
    if s >= r.tau {
        return true;
    }
    if s <= 0.0 {
        return false;
    }
    let (a, b) = (r.tau / s, (1.0 - r.tau) / (1.0 - s));
    for (wk, i) in w.iter_mut().zip(&inside) {
        *wk *= if *i { a } else { b };
    }
    true
}

/// Fits the NPMLE to `data`.
pub fn fit(data: &Dataset, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    check_dims(data.dim(), data)?;
    let grid = build_grid(&cfg.grid, data)?;
    if let Some(r) = &cfg.restriction {
        if r.theta.dim() != data.dim() {
            return Err(usage("restriction box dimension does not match the data"));
        }
        if grid.restricted_to(&r.theta).is_empty() {
            return Err(usage("no grid point lies inside the restriction box"));
        }
    }
    if grid.is_empty() {
        return Err(usage("atom grid is empty"));
    }
    match cfg.algorithm {
        Algorithm::Em => fit_em(data, &grid, cfg),
        Algorithm::VertexDirection => fit_vd(data, &grid, cfg, false),
        Algorithm::Hybrid => fit_vd(data, &grid, cfg, true),
    }
}

fn fit_em(data: &Dataset, grid: &AtomGrid, cfg: &SolverConfig) -> Result<SolverResult> {
    let dim = data.dim();
    let kern = Kernel::new(data, &grid.points);
    let mut w = vec![1.0 / grid.len() as f64; grid.len()];
    if let Some(r) = &cfg.restriction {
        project_restriction(&grid.points, dim, &mut w, r);
    }
    let mut trace = vec![kern.loglik(&w)];
    let mut iters = 0;
    while iters < cfg.max_iters {
        let (mut next, _) = kern.em_update(&w);
        if let Some(r) = &cfg.restriction {
            project_restriction(&grid.points, dim, &mut next, r);
        }
        w = next;
        iters += 1;
        let ll = kern.loglik(&w);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if (ll - prev).abs() <= cfg.rel_tol * ll.abs().max(1.0) {
            break;
        }
    }
    let log_f = kern.log_mix(&w);
    let dk = kern.directional_given(&log_f);
    let gap = gap_from(&dk, &grid.points, dim, cfg.restriction.as_ref());
    let measure = MixingMeasure::normalized(dim, grid.points.clone(), w)?;
    let loglik = *trace.last().unwrap();
    Ok(SolverResult { measure, loglik, gap, iters, trace })
}

/// Active-set state of the vertex-direction solver.
#[derive(Clone)]
struct Active {
    dim: usize,
    atoms: Vec<f64>,
    w: Vec<f64>,
}

impl Active {
    fn kernel(&self, data: &Dataset) -> Kernel {
        Kernel::new(data, &self.atoms)
    }

    fn prune(&mut self) {
        let keep: Vec<usize> = (0..self.w.len()).filter(|&k| self.w[k] >= DROP_THRESHOLD).collect();
        if keep.len() == self.w.len() || keep.is_empty() {
            return;
        }
        self.atoms = keep.iter().flat_map(|&k| self.atoms[k * self.dim..(k + 1) * self.dim].to_vec()).collect();
        let w: Vec<f64> = keep.iter().map(|&k| self.w[k]).collect();
        let t: f64 = w.iter().sum();
        self.w = w.into_iter().map(|v| v / t).collect();
    }

    fn position(&self, theta: &[f64]) -> Option<usize> {
        self.atoms.chunks_exact(self.dim).position(|a| sq_dist(a, theta) < 1e-24)
    }
}

fn fit_vd(data: &Dataset, grid: &AtomGrid, cfg: &SolverConfig, polish: bool) -> Result<SolverResult> {
    let dim = data.dim();
    let probe = Probe::new(data, grid);
    let mean: Vec<f64> = (0..dim).map(|j| data.points().map(|p| p[j]).sum::<f64>() / data.len() as f64).collect();
    let start = (0..grid.len())
        .min_by(|&a, &b| sq_dist(grid.point(a), &mean).total_cmp(&sq_dist(grid.point(b), &mean)))
        .unwrap();
    let mut act = Active { dim, atoms: grid.point(start).to_vec(), w: vec![1.0] };
    if let Some(r) = &cfg.restriction {
        ensure_inside(&mut act, data, grid, &probe, r);
    }

    let mut trace = Vec::new();
    let mut iters = 0;
    let mut gap;
    loop {
        let kern = act.kernel(data);
        let log_f = kern.log_mix(&act.w);
        trace.push(log_f.iter().sum::<f64>() / data.len() as f64);
        let dk = probe.directional(data, &log_f);
        gap = gap_from(&dk, &grid.points, dim, cfg.restriction.as_ref());
        if gap <= cfg.gap_tol || iters >= cfg.max_iters {
            break;
        }
        iters += 1;
        let (g, _) = argmax(&dk);
        let theta = refine(data, &log_f, grid, g);
        match &cfg.restriction {
            // an atom outside theta may only take mass from outside atoms
            Some(r) if !r.theta.contains(&theta) => {
                let pool: Vec<bool> = act.atoms.chunks_exact(dim).map(|a| !r.theta.contains(a)).collect();
                // with nothing outside yet, the projection below restores feasibility
                let pool = pool.iter().any(|&p| p).then_some(pool.as_slice());
                add_atom(&mut act, data, &log_f, &theta, pool);
            }
            _ => add_atom(&mut act, data, &log_f, &theta, None),
        }
        if let Some(r) = &cfg.restriction {
            // the best inside vertex also enters, since mass moved outside
            // is clawed back by the projection
            let best_in = (0..grid.len())
                .filter(|&g| r.theta.contains(grid.point(g)))
                .fold((usize::MAX, f64::NEG_INFINITY), |b, g| if dk[g] > b.1 { (g, dk[g]) } else { b });
            if best_in.0 != g && best_in.0 != usize::MAX {
                let log_f = act.kernel(data).log_mix(&act.w);
                add_atom(&mut act, data, &log_f, grid.point(best_in.0), None);
            }
        }
        // the inner solve only needs to be accurate relative to the outer gap
        let kkt_tol = 0.1 * gap.max(cfg.gap_tol);
        match cfg.restriction {
            None => reweight_newton(&mut act, data, kkt_tol),
            Some(_) => reweight(&mut act, data, cfg, kkt_tol),
        }
        act.prune();
        if let Some(r) = &cfg.restriction {
            project_restriction(&act.atoms, dim, &mut act.w, r);
        }
    }

    if polish {
        let (before, trace_len) = (act.clone(), trace.len());
        let kern = act.kernel(data);
        let mut ll = kern.loglik(&act.w);
        for _ in 0..MAX_INNER {
            let (mut next, _) = kern.em_update(&act.w);
            if let Some(r) = &cfg.restriction {
                project_restriction(&act.atoms, dim, &mut next, r);
            }
            let nll = kern.loglik(&next);
            act.w = next;
            let done = (nll - ll).abs() <= cfg.rel_tol * nll.abs().max(1.0);
            ll = nll;
            trace.push(ll);
            if done {
                break;
            }
        }
        act.prune();
        if let Some(r) = &cfg.restriction {
            project_restriction(&act.atoms, dim, &mut act.w, r);
        }
        let kern = act.kernel(data);
        let log_f = kern.log_mix(&act.w);
        let polished = gap_from(&probe.directional(data, &log_f), &grid.points, dim, cfg.restriction.as_ref());
        // EM can trade certificate for likelihood; keep it only when the
        // certificate stays within tolerance
        if polished <= gap.max(cfg.gap_tol) {
            gap = polished;
        } else {
            act = before;
            trace.truncate(trace_len);
        }
    }

    let measure = MixingMeasure::normalized(dim, act.atoms, act.w)?;
    let f = GmmDensity::new(measure.clone());
    let loglik = loglik(&f, data)?;
    if trace.last().map_or(true, |&t| t != loglik) {
        trace.push(loglik);
    }
    Ok(SolverResult { measure, loglik, gap, iters, trace })
}

/// Places mass `tau` on the best probe point inside `theta` when the
/// active set has no atom there.
fn ensure_inside(act: &mut Active, data: &Dataset, grid: &AtomGrid, probe: &Probe<'_>, r: &Restriction) {
    if project_restriction(&act.atoms, act.dim, &mut act.w, r) {
        return;
    }
    let log_f = act.kernel(data).log_mix(&act.w);
    let dk = probe.directional(data, &log_f);
    let (g, _) = (0..grid.len())
        .filter(|&g| r.theta.contains(grid.point(g)))
        .map(|g| (g, dk[g]))
        .fold((usize::MAX, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
    act.w.iter_mut().for_each(|w| *w *= 1.0 - r.tau);
    act.atoms.extend_from_slice(grid.point(g));
    act.w.push(r.tau);
}

/// Golden-section ascent of `D` along each coordinate within one grid
/// spacing of probe point `g`.
fn refine(data: &Dataset, log_f: &[f64], grid: &AtomGrid, g: usize) -> Vec<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut theta = grid.point(g).to_vec();
    let mut best = directional_at(data, log_f, &theta);
    for j in 0..grid.dim {
        let h = grid.spacing[j];
        if h == 0.0 {
            continue;
        }
        let eval = |t: f64, base: &[f64]| {
            let mut p = base.to_vec();
            p[j] = t;
            directional_at(data, log_f, &p)
        };
        let (mut a, mut b) = (theta[j] - h, theta[j] + h);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (eval(c, &theta), eval(d, &theta));
        for _ in 0..REFINE_STEPS {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c, &theta);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = eval(d, &theta);
            }
        }
        let (t, v) = if fc >= fd { (c, fc) } else { (d, fd) };
        if v > best {
            best = v;
            theta[j] = t;
        }
    }
    theta
}

/// Adds `theta` with the weight maximizing the log-likelihood along the
/// segment towards the point mass at `theta`. With a `pool`, only the
/// pooled atoms give up mass, so mass outside the pool is left alone.
fn add_atom(act: &mut Active, data: &Dataset, log_f: &[f64], theta: &[f64], pool: Option<&[bool]>) {
    let c = gauss_log_norm(act.dim);
    let ratio: Vec<f64> = data
        .points()
        .zip(log_f)
        .map(|(x, lf)| (c - 0.5 * sq_dist(x, theta) - lf).min(575.0).exp())
        .collect();
    // share of f(X_i) held by the pool, and the pool's mass
    let (share, mass) = match pool {
        None => (vec![1.0; ratio.len()], 1.0),
        Some(p) => {
            let masked: Vec<f64> = act.w.iter().zip(p).map(|(w, &in_pool)| if in_pool { *w } else { 0.0 }).collect();
            let kern = act.kernel(data);
            let s = kern.mixture(&masked);
            let share = s.iter().zip(&kern.shift).zip(log_f).map(|((s, c), lf)| s * (c - lf).exp()).collect();
            (share, masked.iter().sum())
        }
    };
    if mass <= 0.0 {
        return;
    }
    let slope = |a: f64| ratio.iter().zip(&share).map(|(r, q)| (mass * r - q) / (1.0 + a * (mass * r - q))).sum::<f64>();
    let alpha = if slope(1.0) >= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    match pool {
        None => act.w.iter_mut().for_each(|w| *w *= 1.0 - alpha),
        Some(p) => act.w.iter_mut().zip(p).filter(|(_, &in_pool)| in_pool).for_each(|(w, _)| *w *= 1.0 - alpha),
    }
    match act.position(theta) {
        Some(k) => act.w[k] += alpha * mass,
        None => {
            act.atoms.extend_from_slice(theta);
            act.w.push(alpha * mass);
        }
    }
}

/// Reweights the active atoms by constrained Newton steps: the quadratic
/// model `‖S w − 2‖²` is minimized over `w ≥ 0` and the step is
/// backtracked until it gains a third of the predicted increase. A plain
/// EM step is taken when the Newton direction does not ascend.
fn reweight_newton(act: &mut Active, data: &Dataset, kkt_tol: f64) {
    let kern = act.kernel(data);
    let mut w = act.w.clone();
    let mut ll = kern.loglik(&w);
    for _ in 0..MAX_NEWTON {
        let (gram, rhs, dk) = kern.newton_system(&w);
        if dk.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0 <= kkt_tol {
            break;
        }
        let x = nnls::nnls(&gram, &rhs);
        let t = x.sum();
        let dir: Vec<f64> = x.iter().zip(&w).map(|(x, w)| x / t - w).collect();
        let slope: f64 = dir.iter().zip(&dk).map(|(d, g)| d * g).sum();
        let mut next = None;
        if t > 0.0 && t.is_finite() && slope > 0.0 {
            let mut alpha = 1.0;
            while alpha > 1e-10 {
                let cand: Vec<f64> = w.iter().zip(&dir).map(|(w, d)| (w + alpha * d).max(0.0)).collect();
                let lc = kern.loglik(&cand);
                if lc >= ll + alpha * slope / 3.0 {
                    next = Some((cand, lc));
                    break;
                }
                alpha *= 0.5;
            }
        }
        let (cand, lc) = next.unwrap_or_else(|| {
            let (e, _) = kern.em_update(&w);
            let l = kern.loglik(&e);
            (e, l)
        });
        let gain = lc - ll;
        let s: f64 = cand.iter().sum();
        w = cand.into_iter().map(|v| v / s).collect();
        ll = lc;
        if gain <= 1e-15 * ll.abs().max(1.0) {
            break;
        }
    }
    act.w = w;
}

/// Reweights the active atoms with squared-extrapolation EM, falling back
/// to the plain double EM step whenever extrapolation does not improve.
fn reweight(act: &mut Active, data: &Dataset, cfg: &SolverConfig, kkt_tol: f64) {
    let kern = act.kernel(data);
    let project = |w: &mut Vec<f64>| {
        if let Some(r) = &cfg.restriction {
            project_restriction(&act.atoms, act.dim, w, r);
        }
    };
    let mut w = act.w.clone();
    project(&mut w);
    let mut ll = kern.loglik(&w);
    for _ in 0..MAX_INNER {
        let dk = kern.directional(&w);
        let kkt = gap_from(&dk, &act.atoms, act.dim, cfg.restriction.as_ref());
        if kkt <= kkt_tol {
            break;
        }
        let (mut w1, _) = kern.em_update(&w);
        project(&mut w1);
        let (mut w2, ll1) = kern.em_update(&w1);
        project(&mut w2);
        let ll2 = kern.loglik(&w2);
        let r: Vec<f64> = w1.iter().zip(&w).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = w2.iter().zip(&w1).zip(&w).map(|((c, b), a)| c - 2.0 * b + a).collect();
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut next = w2.clone();
        let mut next_ll = ll2;
        if vn > 0.0 {
            let step = (-rn / vn).min(-1.0);
            let mut e: Vec<f64> = w
                .iter()
                .zip(&r)
                .zip(&v)
                .map(|((w, r), v)| (w - 2.0 * step * r + step * step * v).max(0.0))
                .collect();
            let t: f64 = e.iter().sum();
            if t > 0.0 && t.is_finite() {
                e.iter_mut().for_each(|x| *x /= t);
                let (mut e, _) = kern.em_update(&e);
                project(&mut e);
                let lle = kern.loglik(&e);
                if lle > ll2 {
                    next = e;
                    next_ll = lle;
                }
            }
        }
        let improved = next_ll - ll;
        w = next;
        ll = next_ll;
        if improved.abs() <= 1e-15 * ll.abs().max(1.0) && ll1 >= ll - 1e-15 {
            break;
        }
    }
    act.w = w;
}

/// Convenience: fit with `cfg` and return the fitted density.
pub fn fit_density(data: &Dataset, cfg: &SolverConfig) -> Result<GmmDensity> {
    Ok(fit(data, cfg)?.density())
}

/// Mass the fitted measure keeps inside the restriction box, if any.
pub fn restricted_mass(result: &SolverResult, cfg: &SolverConfig) -> Option<f64> {
    cfg.restriction.as_ref().map(|r| restrict_mass(&result.measure, &r.theta))
}
