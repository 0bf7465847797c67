//! Finite approximations of Gaussian mixtures and the bracket family built
//! from them.
//!
//! A mixing measure on a compact set is first reduced to few atoms by
//! matching its moments (Carathéodory), then snapped to a lattice of atom
//! positions and weights. The log-densities of all lattice measures form
//! the centres of a bracket family for `log M(Θ; τ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::mixture::{BoxRegion, GmmDensity, MixingMeasure};
use crate::numeric::{gauss_log_norm, log_sum_exp, sq_norm};
use crate::rng;

/// A real function of a point, used as a moment to preserve.
pub type TestFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Relative tolerance on the pivots of the moment matrix.
pub const RANK_TOL: f64 = 1e-12;

/// Monomials `x_1^{k_1}⋯x_d^{k_d}` with every `k_j ≤ max_exp`, in
/// lexicographic order of the exponent vector.
pub fn monomials(dim: usize, max_exp: usize) -> Vec<Box<TestFn>> {
    let per = max_exp + 1;
    let total = per.pow(dim as u32);
    (0..total)
        .map(|code| {
            let mut exps = vec![0i32; dim];
            let mut c = code;
            for e in exps.iter_mut().rev() {
                *e = (c % per) as i32;
                c /= per;
            }
            Box::new(move |x: &[f64]| x.iter().zip(&exps).map(|(v, &k)| v.powi(k)).product::<f64>()) as Box<TestFn>
        })
        .collect()
}

/// A nonzero `v` with `a·v ≈ 0` for a matrix with more columns than rows.
///
/// Column-pivoted QR first; if its residual is poor, the null vector is read
/// off a full SVD of the zero-padded square matrix instead.
fn null_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    let scale = a.amax().max(1.0);
    let ok = |v: &DVector<f64>| (a * v).amax() <= 1e-9 * scale * v.amax();

    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    let rank = (0..rows.min(cols)).take_while(|&i| r[(i, i)].abs() > RANK_TOL * r00).count();
    if rank < cols {
        // solve R[:rank,:rank] y = −R[:rank, rank]; free variable at `rank`
        let mut v = DVector::zeros(cols);
        v[rank] = 1.0;
        for i in (0..rank).rev() {
            let mut s = -r[(i, rank)];
            for j in i + 1..rank {
                s -= r[(i, j)] * v[j];
            }
            v[i] = s / r[(i, i)];
        }
        qr.p().inv_permute_rows(&mut v);
        if v.iter().all(|x| x.is_finite()) && ok(&v) {
            return Ok(v);
        }
    }

    let mut sq = DMatrix::zeros(cols, cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return singular vectors".into()))?;
    let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &s)| if s < b.1 { (i, s) } else { b });
    let v = vt.row(k).transpose();
    if ok(&v) {
        Ok(v)
    } else {
        Err(Error::Numerical("moment matrix null space could not be resolved".into()))
    }
}

/// Reduces `mu` to at most `funcs.len() + 1` atoms while keeping
/// `E[h]` for every `h` in `funcs` (and the total mass).
///
/// Each round takes `m + 2` atoms, finds a direction in weight space that
/// leaves all moments fixed, and moves along it until a weight hits zero.
/// The support of the result is a subset of the support of `mu`.
pub fn caratheodory_reduce(mu: &MixingMeasure, funcs: &[Box<TestFn>]) -> Result<MixingMeasure> {
    let m = funcs.len();
    let dim = mu.dim();
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<f64> = Vec::new();
    for (a, &p) in mu.atoms().zip(mu.weights()) {
        if p > 0.0 {
            atoms.push(a.to_vec());
            w.push(p);
        }
    }
    let values: Vec<Vec<f64>> = atoms.iter().map(|a| funcs.iter().map(|h| h(a)).collect()).collect();
    let mut live: Vec<usize> = (0..atoms.len()).collect();
    while live.len() > m + 1 {
        let block = &live[..m + 2];
        let mut a = DMatrix::zeros(m + 1, m + 2);
        for (c, &k) in block.iter().enumerate() {
            for j in 0..m {
                a[(j, c)] = values[k][j];
            }
            a[(m, c)] = 1.0;
        }
        let mut v = null_vector(&a)?;
        if !v.iter().any(|x| *x < 0.0) {
            v = -v;
        }
        let (hit, step) = block
            .iter()
            .zip(v.iter())
            .enumerate()
            .filter(|(_, (_, vi))| **vi < 0.0)
            .map(|(c, (&k, vi))| (c, w[k] / -vi))
            .fold((usize::MAX, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        if hit == usize::MAX {
            return Err(Error::Numerical("null direction has no negative entry".into()));
        }
        for (&k, vi) in block.iter().zip(v.iter()) {
            w[k] = (w[k] + step * vi).max(0.0);
        }
        w[block[hit]] = 0.0;
        live.retain(|&k| w[k] > 0.0);
    }
    let flat: Vec<f64> = live.iter().flat_map(|&k| atoms[k].clone()).collect();
    let weights: Vec<f64> = live.iter().map(|&k| w[k]).collect();
    MixingMeasure::normalized(dim, flat, weights)
}

/// Constants of the discretization and bracket construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscretizeConfig {
    pub eps: f64,
    /// Taylor order: moments up to `2t − 1` per coordinate are matched.
    pub t: usize,
    /// Radius of the ball `B_R` on which log-densities are approximated.
    pub radius: f64,
    /// Half-width of the outer box holding lattice atoms, `R + a` with
    /// `a = √(81/40)·R`.
    pub outer: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Atom budget `m + 1` of a family member.
    pub max_atoms: usize,
    /// Largest family the builder agrees to construct.
    pub cap: u64,
}

pub const DEFAULT_CAP: u64 = 10_000_000;

impl DiscretizeConfig {
    /// Parameters small enough to enumerate: `R = 2‖Θ‖∞`, `δ = 2ε`,
    /// `γ = 1/⌈1/(2ε)⌉`, `⌈ln(1/ε)⌉ + 1` atoms and Taylor order 6.
    pub fn desk(eps: f64, theta: &BoxRegion) -> Self {
        let radius = (2.0 * theta.sup_norm()).max(1e-3);
        DiscretizeConfig {
            eps,
            t: 6,
            radius,
            outer: radius * (1.0 + (81.0f64 / 40.0).sqrt()),
            delta: 2.0 * eps,
            gamma: 1.0 / (1.0 / (2.0 * eps)).ceil(),
            max_atoms: (1.0 / eps).ln().ceil() as usize + 1,
            cap: DEFAULT_CAP,
        }
    }

    /// The constants of the existence proof: `R = √(80 ln(1/ε))`,
    /// `t = ⌈C₁ ln(1/ε)⌉` with `C₁ = max(81, 160e²)`, and lattice
    /// spacings of order `ε^81`. Only useful to see how large the family
    /// would be.
    pub fn literal(eps: f64, dim: usize) -> Self {
        let l = (1.0 / eps).ln();
        let radius = (80.0 * l).sqrt();
        let c1 = 81.0f64.max(160.0 * std::f64::consts::E.powi(2));
        let t = (c1 * l).ceil() as usize;
        let m = 2 * ((2 * t).pow(dim as u32) + 1);
        let e81 = (81.0 * eps.ln()).exp();
        let delta = (e81 / (2.0 * gauss_lipschitz(dim) * dim as f64 * m as f64)).min(1.0);
        let gamma = (e81 / (4.0 * m as f64)).min(1.0);
        DiscretizeConfig {
            eps,
            t,
            radius,
            outer: radius * (1.0 + (81.0f64 / 40.0).sqrt()),
            delta,
            gamma: 1.0 / (1.0 / gamma).ceil(),
            max_atoms: m + 1,
            cap: DEFAULT_CAP,
        }
    }

    pub fn validate(&self, theta: &BoxRegion) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(usage("eps must lie in (0, 1)"));
        }
        if self.t == 0 {
            return Err(usage("Taylor order must be at least 1"));
        }
        if self.radius < 2.0 * theta.sup_norm() {
            return Err(usage(format!("radius {} is below 2·‖Θ‖∞ = {}", self.radius, 2.0 * theta.sup_norm())));
        }
        if !(self.outer >= self.radius) {
            return Err(usage("outer box must contain B_R"));
        }
        if !(self.delta > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(usage("lattice spacings must be positive, gamma at most 1"));
        }
        let k = 1.0 / self.gamma;
        if (k - k.round()).abs() > 1e-9 {
            return Err(usage("1/gamma must be an integer so lattice weights can sum to 1"));
        }
        if self.max_atoms == 0 {
            return Err(usage("atom budget must be positive"));
        }
        Ok(())
    }

    pub fn outer_box(&self, dim: usize) -> BoxRegion {
        BoxRegion::cube(dim, -self.outer, self.outer).expect("outer half-width is positive")
    }
}

/// Moment-matching reduction of a measure on `theta` with all monomials of
/// per-coordinate degree below `2t`: at most `(2t)^d + 1` atoms, all in
/// `theta`.
pub fn discretize_compact(mu: &MixingMeasure, theta: &BoxRegion, cfg: &DiscretizeConfig) -> Result<MixingMeasure> {
    cfg.validate(theta)?;
    if theta.dim() != mu.dim() {
        return Err(usage("Θ and the measure differ in dimension"));
    }
    if mu.atoms().any(|a| !theta.contains(a)) {
        return Err(usage("discretize_compact needs every atom inside Θ"));
    }
    caratheodory_reduce(mu, &monomials(mu.dim(), 2 * cfg.t - 1))
}

/// Snaps atoms to the `delta` lattice (nearest point, ties toward smaller
/// coordinates, kept inside `region`) and rounds weights down to multiples
/// of `gamma`. The mass lost to rounding goes to an atom at the origin.
pub fn lattice_project(mu: &MixingMeasure, delta: f64, gamma: f64, region: &BoxRegion) -> Result<MixingMeasure> {
    if !(delta > 0.0 && gamma > 0.0) {
        return Err(usage("lattice spacings must be positive"));
    }
    if region.dim() != mu.dim() {
        return Err(usage("region and measure differ in dimension"));
    }
    if mu.atoms().any(|a| !region.contains(a)) {
        return Err(usage("lattice_project needs every atom inside the region"));
    }
    let dim = mu.dim();
    let mut keys: Vec<Vec<i64>> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut add = |key: Vec<i64>, c: u64| {
        if c == 0 {
            return;
        }
        match keys.iter().position(|k| *k == key) {
            Some(i) => counts[i] += c,
            None => {
                keys.push(key);
                counts.push(c);
            }
        }
    };
    let mut total = 0u64;
    for (a, &p) in mu.atoms().zip(mu.weights()) {
        let key: Vec<i64> = a
            .iter()
            .zip(region.lo.iter().zip(&region.hi))
            .map(|(&x, (&lo, &hi))| {
                let k = (x / delta - 0.5).ceil() as i64;
                k.clamp((lo / delta - 1e-9).ceil() as i64, (hi / delta + 1e-9).floor() as i64)
            })
            .collect();
        let c = (p / gamma + 1e-9).floor() as u64;
        total += c;
        add(key, c);
    }
    let mut flat = Vec::with_capacity(keys.len() * dim);
    let mut weights = Vec::with_capacity(keys.len() + 1);
    for (k, &c) in keys.iter().zip(&counts) {
        flat.extend(k.iter().map(|&v| v as f64 * delta));
        weights.push(c as f64 * gamma);
    }
    let residual = 1.0 - total as f64 * gamma;
    if residual > 1e-12 {
        let origin = vec![0i64; dim];
        match keys.iter().position(|k| *k == origin) {
            Some(i) => weights[i] += residual,
            None => {
                flat.extend(std::iter::repeat(0.0).take(dim));
                weights.push(residual);
            }
        }
    }
    MixingMeasure::from_flat(dim, flat, weights)
}

/// `sup |∂φ/∂x_i| = (2π)^{−d/2} e^{−1/2}`, so `|φ(u) − φ(v)| ≤ C‖u − v‖₁`.
pub fn gauss_lipschitz(dim: usize) -> f64 {
    (gauss_log_norm(dim) - 0.5).exp()
}

/// Constant `C` with `−log f(x) ≤ ‖x‖² + C` for all `f ∈ M(Θ; τ)`:
/// `C = −ln(τ (2π)^{−d/2}) + ‖Θ‖∞²`.
pub fn envelope_constant(theta: &BoxRegion, tau: f64) -> f64 {
    -(tau.ln() + gauss_log_norm(theta.dim())) + theta.sup_norm().powi(2)
}

/// `|log u − log v| ≤ |u − v| / min(u, v)` for positive reals.
pub fn log_lipschitz_bound(u: f64, v: f64) -> f64 {
    (u - v).abs() / u.min(v)
}

/// Density error from matching moments up to order `2t − 1`:
/// `2(2π)^{−d/2} (e·r²/(2t))^t` where `r` bounds `‖x − θ‖`.
pub fn taylor_remainder_bound(dim: usize, r_sq: f64, t: usize) -> f64 {
    2.0 * gauss_log_norm(dim).exp() * (std::f64::consts::E * r_sq / (2.0 * t as f64)).powi(t as i32)
}

/// Mixture density with `e^{−y}` replaced by its degree `t − 1` Taylor
/// polynomial. Measures with equal moments up to order `2t − 1` give equal
/// surrogates.
pub fn taylor_surrogate(mu: &MixingMeasure, x: &[f64], t: usize) -> f64 {
    let c = gauss_log_norm(mu.dim()).exp();
    mu.atoms()
        .zip(mu.weights())
        .map(|(a, w)| {
            let y: f64 = 0.5 * a.iter().zip(x).map(|(a, x)| (x - a) * (x - a)).sum::<f64>();
            let mut term = 1.0;
            let mut s = 1.0;
            for i in 1..t {
                term *= -y / i as f64;
                s += term;
            }
            w * s
        })
        .sum::<f64>()
        * c
}

fn max_sq_dist_to_box(x: &[f64], b: &BoxRegion) -> f64 {
    x.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(&v, (&lo, &hi))| (v - lo).powi(2).max((v - hi).powi(2)))
        .sum()
}

/// Points of `B_R` used for sup-norm checks: 2000 equispaced points for
/// d = 1, a 45×45 grid clipped to the disc for d = 2.
pub fn verification_grid(dim: usize, radius: f64) -> Result<Vec<f64>> {
    match dim {
        1 => Ok((0..2000).map(|i| -radius + 2.0 * radius * i as f64 / 1999.0).collect()),
        2 => {
            let k = 45;
            let axis: Vec<f64> = (0..k).map(|i| -radius + 2.0 * radius * i as f64 / (k - 1) as f64).collect();
            Ok(axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| [a, b]))
                .filter(|p| sq_norm(p) <= radius * radius * (1.0 + 1e-12))
                .flatten()
                .collect())
        }
        _ => Err(Error::Unsupported("verification grids exist for d ≤ 2".into())),
    }
}

/// The lattice family `P_{δ,γ,m}`: measures with at most `max_atoms`
/// atoms on the `δ` lattice inside the outer box and weights in `γ·ℕ`.
#[derive(Clone, Debug)]
pub struct BracketFamily {
    pub theta: BoxRegion,
    pub tau: f64,
    pub cfg: DiscretizeConfig,
    lattice: Vec<f64>,
    levels: usize,
    pub count: u64,
    pub log_count: f64,
    /// Envelope constant of `M(Θ; τ)`.
    pub envelope: f64,
    /// Half-width `C·ε` of the inner brackets.
    pub half_width: f64,
}

/// `ln C(n, k)` for small `k`.
fn ln_binom(n: f64, k: usize) -> f64 {
    (0..k).map(|i| (n - i as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `ln |P|` where `|P| = Σ_{k ≤ min(atoms, levels)} C(points, k)·C(levels − 1, k − 1)`.
pub fn family_log_count(points: f64, levels: f64, max_atoms: usize) -> f64 {
    let kmax = (max_atoms as f64).min(levels).min(points) as usize;
    let terms: Vec<f64> = (1..=kmax).map(|k| ln_binom(points, k) + ln_binom(levels - 1.0, k - 1)).collect();
    log_sum_exp(&terms)
}

/// Exact `|P|` when it fits in a `u128`.
pub fn family_count_exact(points: u64, levels: u64, max_atoms: usize) -> Option<u128> {
    let binom = |n: u64, k: u64| -> Option<u128> {
        if k > n {
            return Some(0);
        }
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
        }
        Some(acc)
    };
    let kmax = (max_atoms as u64).min(levels).min(points);
    let mut total: u128 = 0;
    for k in 1..=kmax {
        total = total.checked_add(binom(points, k)?.checked_mul(binom(levels - 1, k - 1)?)?)?;
    }
    Some(total)
}

/// Fitted once on the desk family at `ε = 0.3`, `d = 1`, `Θ = [−1, 1]`
/// as `⌈ln|P| / (ln 1/ε)²⌉`, then held fixed.
pub const ENTROPY_D: f64 = 4.0;

/// Builds the family, refusing when it would exceed `cfg.cap` members.
pub fn build_bracket_family(theta: &BoxRegion, tau: f64, cfg: &DiscretizeConfig) -> Result<BracketFamily> {
    cfg.validate(theta)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(usage("tau must lie in (0, 1]"));
    }
    let dim = theta.dim();
    let per_axis = 2.0 * (cfg.outer / cfg.delta + 1e-9).floor() + 1.0;
    let points = per_axis.powi(dim as i32);
    let levels = (1.0 / cfg.gamma).round();
    let exact = (points < 1e15 && levels < 1e15).then(|| family_count_exact(points as u64, levels as u64, cfg.max_atoms)).flatten();
    let log_count = match exact {
        Some(c) => (c as f64).ln(),
        None => family_log_count(points, levels, cfg.max_atoms),
    };
    let required = exact.map_or(log_count.exp(), |c| c as f64);
    if required > cfg.cap as f64 * (1.0 + 1e-9) {
        return Err(Error::Capacity { required, cap: cfg.cap });
    }
    if dim > 2 {
        return Err(Error::Unsupported("bracket families are enumerated for d ≤ 2".into()));
    }
    let kmax = (cfg.outer / cfg.delta + 1e-9).floor() as i64;
    let axis: Vec<f64> = (-kmax..=kmax).map(|k| k as f64 * cfg.delta).collect();
    let lattice: Vec<f64> = if dim == 1 { axis } else { axis.iter().flat_map(|&a| axis.iter().flat_map(move |&b| [a, b])).collect() };
    let count = exact.map_or(required.round() as u64, |c| c as u64);
    let envelope = envelope_constant(theta, tau);
    let mut fam = BracketFamily {
        theta: theta.clone(),
        tau,
        cfg: cfg.clone(),
        lattice,
        levels: levels as usize,
        count,
        log_count,
        envelope,
        half_width: 0.0,
    };
    fam.half_width = fam.composed_bound()?;
    Ok(fam)
}

impl BracketFamily {
    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn lattice_len(&self) -> usize {
        self.lattice.len() / self.dim()
    }

    /// All members, smallest supports first, then lexicographic in lattice
    /// indices and weights.
    pub fn members(&self) -> Members<'_> {
        Members { fam: self, k: 1, support: vec![0], parts: vec![self.levels], done: false }
    }

    fn build(&self, support: &[usize], parts: &[usize]) -> MixingMeasure {
        let d = self.dim();
        let flat = support.iter().flat_map(|&i| self.lattice[i * d..(i + 1) * d].to_vec()).collect();
        let w = parts.iter().map(|&p| p as f64 / self.levels as f64).collect();
        MixingMeasure::normalized(d, flat, w).expect("lattice members are valid measures")
    }

    /// Whether `mu` is (up to rounding) a member of the family.
    pub fn contains(&self, mu: &MixingMeasure) -> bool {
        let on_grid = |v: f64, s: f64| ((v / s) - (v / s).round()).abs() < 1e-9;
        mu.dim() == self.dim()
            && mu.len() <= self.cfg.max_atoms
            && mu.flat_atoms().iter().all(|&v| on_grid(v, self.cfg.delta) && v.abs() <= self.cfg.outer + 1e-9)
            && mu.weights().iter().all(|&w| w > 0.0 && on_grid(w, self.cfg.gamma))
            && (mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9
    }

    /// Bracket `[l, u]` around `log f` glued from the member's inner
    /// bracket on `B_R` and the envelope outside it.
    pub fn bracket(&self, member: &GmmDensity, x: &[f64]) -> (f64, f64) {
        if sq_norm(x) <= self.cfg.radius * self.cfg.radius {
            let h = member.ln_f(x);
            (h - self.half_width, (h + self.half_width).min(0.0))
        } else {
            (-sq_norm(x) - self.envelope, 0.0)
        }
    }

    /// Pointwise bound on `|log f − log f̃̃|` from the two approximation
    /// steps, given the mass `f` puts on `Θ` and the number `m` of atoms
    /// entering the lattice projection.
    fn pointwise_bound(&self, x: &[f64], m: usize, inside_mass: f64) -> f64 {
        let d = self.dim();
        let cfg = &self.cfg;
        let outer = cfg.outer_box(d);
        let taylor = inside_mass * taylor_remainder_bound(d, max_sq_dist_to_box(x, &self.theta), cfg.t)
            + (1.0 - inside_mass) * taylor_remainder_bound(d, max_sq_dist_to_box(x, &outer), cfg.t);
        let base = self.tau.ln() + gauss_log_norm(d) - sq_norm(x);
        let low1 = (base - self.theta.sup_norm().powi(2)).exp();
        let low2 = (base - self.theta.fattened(cfg.delta).sup_norm().powi(2)).exp();
        let lattice = m as f64 * (gauss_lipschitz(d) * d as f64 * cfg.delta + 2.0 * cfg.gamma);
        taylor / low1 + lattice / low2
    }

    /// The composed bound `C·ε`: the sup over the verification grid of the
    /// pointwise bound with the largest possible `m` and the smallest
    /// inside mass `tau`.
    fn composed_bound(&self) -> Result<f64> {
        let d = self.dim();
        let m_max = 2 * ((2 * self.cfg.t).pow(d as u32) + 1);
        let grid = verification_grid(d, self.cfg.radius)?;
        Ok(grid.chunks_exact(d).map(|x| self.pointwise_bound(x, m_max, self.tau)).fold(0.0, f64::max))
    }

    /// Runs the constructive pipeline on `f`: split at `Θ`, reduce each
    /// part by moment matching, recombine and project onto the lattice.
    pub fn cover(&self, f: &MixingMeasure) -> Result<Coverage> {
        let d = self.dim();
        if f.dim() != d {
            return Err(usage("measure and family differ in dimension"));
        }
        let outer = self.cfg.outer_box(d);
        let mut parts = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
        for (a, &w) in f.atoms().zip(f.weights()) {
            let side = if self.theta.contains(a) { 0 } else { 1 };
            if side == 1 && !outer.contains(a) {
                return Err(usage("atoms outside Θ must lie in the outer box"));
            }
            parts[side].0.extend_from_slice(a);
            parts[side].1.push(w);
        }
        let inside_mass: f64 = parts[0].1.iter().sum();
        if inside_mass < self.tau - 1e-12 {
            return Err(usage("measure puts less than tau on Θ"));
        }
        let funcs = monomials(d, 2 * self.cfg.t - 1);
        let mut flat = Vec::new();
        let mut weights = Vec::new();
        for (side, (atoms, w)) in parts.into_iter().enumerate() {
            let mass: f64 = w.iter().sum();
            if mass <= 0.0 {
                continue;
            }
            let part = MixingMeasure::normalized(d, atoms, w)?;
            let reduced = if side == 0 { discretize_compact(&part, &self.theta, &self.cfg)? } else { caratheodory_reduce(&part, &funcs)? };
            flat.extend_from_slice(reduced.flat_atoms());
            weights.extend(reduced.weights().iter().map(|v| v * mass));
        }
        let reduced = MixingMeasure::normalized(d, flat, weights)?;
        let projected = lattice_project(&reduced, self.cfg.delta, self.cfg.gamma, &outer)?;

        let grid = verification_grid(d, self.cfg.radius)?;
        let fd = GmmDensity::new(f.clone());
        let pd = GmmDensity::new(projected.clone());
        let mut measured = 0.0f64;
        let mut bound = 0.0f64;
        let mut violations = 0;
        for x in grid.chunks_exact(d) {
            let gap = (fd.ln_f(x) - pd.ln_f(x)).abs();
            let b = self.pointwise_bound(x, reduced.len(), inside_mass.min(1.0));
            violations += (gap > b) as usize;
            measured = measured.max(gap);
            bound = bound.max(b);
        }
        Ok(Coverage { reduced_atoms: reduced.len(), member: projected, measured_gap: measured, bound, violations })
    }

    /// The member minimizing `sup_grid |log f − h|`, lowest index on ties.
    pub fn nearest_member(&self, f: &MixingMeasure) -> Result<(MixingMeasure, f64)> {
        let d = self.dim();
        let grid = verification_grid(d, self.cfg.radius)?;
        let fd = GmmDensity::new(f.clone());
        let target: Vec<f64> = grid.chunks_exact(d).map(|x| fd.ln_f(x)).collect();
        let members: Vec<MixingMeasure> = self.members().collect();
        let (idx, gap) = members
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let g = GmmDensity::new(m.clone());
                let gap = grid.chunks_exact(d).zip(&target).map(|(x, t)| (g.ln_f(x) - t).abs()).fold(0.0, f64::max);
                (i, gap)
            })
            .reduce(|| (usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        Ok((members[idx].clone(), gap))
    }
}

/// Outcome of [`BracketFamily::cover`].
#[derive(Clone, Debug)]
pub struct Coverage {
    /// Atoms after moment matching, before lattice projection.
    pub reduced_atoms: usize,
    pub member: MixingMeasure,
    /// `sup_grid |log f − log f_member|`.
    pub measured_gap: f64,
    /// Sup over the grid of the pointwise bound for this `f`.
    pub bound: f64,
    /// Grid points where the measured gap exceeded the pointwise bound.
    pub violations: usize,
}

/// Lazy enumeration of a [`BracketFamily`].
pub struct Members<'a> {
    fam: &'a BracketFamily,
    k: usize,
    support: Vec<usize>,
    parts: Vec<usize>,
    done: bool,
}

/// Next k-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Next composition of `sum(parts)` into positive parts, lexicographic.
fn next_composition(parts: &mut [usize]) -> bool {
    let k = parts.len();
    if k < 2 {
        return false;
    }
    // find the rightmost position (before the last) that can grow
    for i in (0..k - 1).rev() {
        let tail: usize = parts[i + 1..].iter().sum();
        if tail > k - 1 - i {
            parts[i] += 1;
            let rest = tail - 1;
            for p in parts[i + 1..k - 1].iter_mut() {
                *p = 1;
            }
            parts[k - 1] = rest - (k - 2 - i);
            return true;
        }
    }
    false
}

impl Iterator for Members<'_> {
    type Item = MixingMeasure;

    fn next(&mut self) -> Option<MixingMeasure> {
        if self.done {
            return None;
        }
        let out = self.fam.build(&self.support, &self.parts);
        let n = self.fam.lattice_len();
        if !next_composition(&mut self.parts) {
            let k = self.k;
            self.parts = vec![1; k];
            self.parts[k - 1] = self.fam.levels - (k - 1);
            if !next_combination(&mut self.support, n) {
                let kmax = self.fam.cfg.max_atoms.min(self.fam.levels).min(n);
                if k + 1 > kmax {
                    self.done = true;
                } else {
                    self.k = k + 1;
                    self.support = (0..k + 1).collect();
                    self.parts = vec![1; k + 1];
                    self.parts[k] = self.fam.levels - k;
                }
            }
        }
        Some(out)
    }
}

/// A random element of `M(Θ; τ)`: 1–4 atoms in `Θ` holding mass at least
/// `tau`, and 0–3 atoms in `outer` outside `Θ`.
pub fn random_class_member(theta: &BoxRegion, tau: f64, outer: &BoxRegion, seed: u64) -> Result<MixingMeasure> {
    let mut r = rng::stream(seed);
    let d = theta.dim();
    let uniform_in = |r: &mut rng::StreamRng, b: &BoxRegion| -> Vec<f64> {
        b.lo.iter().zip(&b.hi).map(|(&lo, &hi)| if hi > lo { r.random_range(lo..hi) } else { lo }).collect()
    };
    let k_in = r.random_range(1..=4);
    let k_out = r.random_range(0..=3);
    let inside = if k_out == 0 { 1.0 } else { r.random_range(tau..1.0) };
    let mut atoms = Vec::with_capacity((k_in + k_out) * d);
    let mut weights = Vec::new();
    let raw_in: Vec<f64> = (0..k_in).map(|_| r.random_range(0.1..1.0)).collect();
    let s_in: f64 = raw_in.iter().sum();
    for w in raw_in {
        atoms.extend(uniform_in(&mut r, theta));
        weights.push(inside * w / s_in);
    }
    let raw_out: Vec<f64> = (0..k_out).map(|_| r.random_range(0.1..1.0)).collect();
    let s_out: f64 = raw_out.iter().sum();
    for w in raw_out {
        let a = loop {
            let a = uniform_in(&mut r, outer);
            if !theta.contains(&a) {
                break a;
            }
        };
        atoms.extend(a);
        weights.push((1.0 - inside) * w / s_out);
    }
    MixingMeasure::from_flat(d, atoms, weights)
}

/// Summary written by the `bracketing` command.
#[derive(Clone, Debug, Serialize)]
pub struct BracketingStats {
    pub eps: f64,
    pub dim: usize,
    pub count: u64,
    pub log_count: f64,
    /// `log_count / (ln 1/ε)^{d+1}`.
    pub entropy_ratio: f64,
    /// Worst measured `sup_{B_R} |log f − h|` over the random draws, with
    /// `h` from the constructive pipeline.
    pub coverage_worst_gap: f64,
    /// Worst gap when `h` is the best member of the whole family, if the
    /// family was small enough to search.
    pub nearest_worst_gap: Option<f64>,
    /// The composed bound `C·ε` on the coverage gap.
    pub predicted_bound: f64,
    pub members_checked: usize,
    pub all_members_in_family: bool,
    pub config: DiscretizeConfig,
}

/// Largest family searched exhaustively for nearest members.
pub const SEARCH_LIMIT: u64 = 100_000;

/// Builds the desk-scale family for `(Θ, τ, ε)` and checks coverage on
/// `draws` random class members.
pub fn bracketing_stats(theta: &BoxRegion, tau: f64, cfg: &DiscretizeConfig, draws: usize, seed: u64) -> Result<BracketingStats> {
    let fam = build_bracket_family(theta, tau, cfg)?;
    let d = theta.dim();
    let outer = cfg.outer_box(d);
    let mut worst = 0.0f64;
    let mut nearest: Option<f64> = (fam.count <= SEARCH_LIMIT).then_some(0.0);
    let mut all_in = true;
    for i in 0..draws {
        let f = random_class_member(theta, tau, &outer, rng::derive_seed(seed, i as u64))?;
        let cov = fam.cover(&f)?;
        all_in &= fam.contains(&cov.member);
        worst = worst.max(cov.measured_gap);
        if let Some(n) = nearest.as_mut() {
            *n = n.max(fam.nearest_member(&f)?.1);
        }
    }
    Ok(BracketingStats {
        eps: cfg.eps,
        dim: d,
        count: fam.count,
        log_count: fam.log_count,
        entropy_ratio: fam.log_count / (1.0 / cfg.eps).ln().powi(d as i32 + 1),
        coverage_worst_gap: worst,
        nearest_worst_gap: nearest,
        predicted_bound: fam.half_width,
        members_checked: draws,
        all_members_in_family: all_in,
        config: cfg.clone(),
    })
}
