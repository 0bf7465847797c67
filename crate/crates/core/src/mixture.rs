//! Gaussian location mixtures with identity covariance.
//!
//! A [`MixingMeasure`] is a finitely supported probability measure on R^d and
//! a [`GmmDensity`] is its convolution with the standard Gaussian,
//!
//! ```text
//! f(x) = Σ_k π_k (2π)^{-d/2} exp(-‖x − θ_k‖² / 2).
//! ```
//!
//! All mixture sums are evaluated in log space with the max-subtraction trick,
//! so `log_density` stays finite far into the tails where the naive sum
//! underflows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::numeric::{gauss_log_norm, sq_dist};
use crate::rng;

/// Weight sums further than this from one are rejected.
pub const WEIGHT_RENORM_TOL: f64 = 1e-9;

/// A finitely supported probability measure on R^d.
///
/// Atoms are stored row-major in a flat buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct MixingMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for MixingMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        if r.atoms.iter().any(|a| a.len() != r.dim) {
            return Err(usage("atom length does not match dim"));
        }
        MixingMeasure::from_flat(r.dim, r.atoms.concat(), r.weights)
    }
}

impl From<MixingMeasure> for MeasureRepr {
    fn from(m: MixingMeasure) -> Self {
        MeasureRepr {
            dim: m.dim,
            atoms: m.atoms().map(<[f64]>::to_vec).collect(),
            weights: m.weights,
        }
    }
}

impl MixingMeasure {
    /// Builds a measure from row-major atoms. Weights within
    /// [`WEIGHT_RENORM_TOL`] of summing to one are renormalized.
    pub fn from_flat(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(usage("dimension must be positive"));
        }
        if weights.is_empty() {
            return Err(usage("a mixing measure needs at least one atom"));
        }
        if atoms.len() != dim * weights.len() {
            return Err(usage(format!(
                "{} atom coordinates do not match {} weights in dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(usage("atom coordinates must be finite"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(usage("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_RENORM_TOL {
            return Err(usage(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(MixingMeasure { dim, atoms, weights })
    }

    pub fn new(atoms: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().map_or(0, Vec::len);
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(usage("atoms have inconsistent dimensions"));
        }
        Self::from_flat(dim, atoms.concat(), weights)
    }

    /// Point mass at `point`.
    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::from_flat(point.len(), point.to_vec(), vec![1.0])
    }

    /// Equal weights on the given row-major atoms.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        let k = if dim == 0 { 0 } else { atoms.len() / dim };
        Self::from_flat(dim, atoms, vec![1.0 / k.max(1) as f64; k])
    }

    /// Like [`from_flat`](Self::from_flat) but rescales any positive total
    /// mass to one. Used by solvers whose updates drift.
    pub(crate) fn normalized(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("mixing weights collapsed to zero mass".into()));
        }
        Self::from_flat(dim, atoms, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub fn atoms(&self) -> std::slice::ChunksExact<'_, f64> {
        self.atoms.chunks_exact(self.dim)
    }

    pub fn flat_atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Drops atoms whose weight is below `threshold` and renormalizes.
    /// The heaviest atom is always kept.
    pub fn pruned(&self, threshold: f64) -> MixingMeasure {
        let heaviest = self
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(k, _)| k);
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| k == heaviest || self.weights[k] >= threshold)
            .collect();
        let atoms = keep.iter().flat_map(|&k| self.atom(k).iter().copied()).collect();
        let weights = keep.iter().map(|&k| self.weights[k]).collect();
        MixingMeasure::normalized(self.dim, atoms, weights).expect("heaviest atom has positive mass")
    }

    /// `E_μ[h]` for a scalar function of the atom.
    pub fn expect(&self, h: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms().zip(&self.weights).map(|(a, w)| w * h(a)).sum()
    }
}

/// An axis-aligned closed box in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(usage("box bounds must be nonempty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(usage("box bounds must be finite with lo <= hi"));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Parses `lo1,hi1[,lo2,hi2,...]`.
    pub fn parse(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| usage(format!("bad box {s:?}: {e}")))?;
        if vals.is_empty() || vals.len() % 2 != 0 {
            return Err(usage(format!("box {s:?} needs lo,hi pairs")));
        }
        let lo = vals.iter().step_by(2).copied().collect();
        let hi = vals.iter().skip(1).step_by(2).copied().collect();
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// `sup_{θ ∈ box} ‖θ‖`, attained at the farthest corner.
    pub fn sup_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Grows the box by `r` on every side.
    pub fn fattened(&self, r: f64) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().map(|l| l - r).collect(),
            hi: self.hi.iter().map(|h| h + r).collect(),
        }
    }
}

/// Mass that `measure` places on the closed box `region`.
pub fn restrict_mass(measure: &MixingMeasure, region: &BoxRegion) -> f64 {
    measure
        .atoms()
        .zip(measure.weights())
        .filter(|(a, _)| region.contains(a))
        .map(|(_, w)| w)
        .sum::<f64>()
        .min(1.0)
}

/// A Gaussian location mixture density `f_μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmDensity {
    mixing: MixingMeasure,
    log_weights: Vec<f64>,
}

impl Serialize for GmmDensity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.mixing.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GmmDensity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MixingMeasure::deserialize(d).map(GmmDensity::new)
    }
}

impl From<MixingMeasure> for GmmDensity {
    fn from(m: MixingMeasure) -> Self {
        GmmDensity::new(m)
    }
}

impl GmmDensity {
    pub fn new(mixing: MixingMeasure) -> Self {
        let log_weights = mixing.weights().iter().map(|w| w.ln()).collect();
        GmmDensity { mixing, log_weights }
    }

    pub fn mixing(&self) -> &MixingMeasure {
        &self.mixing
    }

    pub fn dim(&self) -> usize {
        self.mixing.dim()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(usage(format!("point has dimension {}, density has {}", x.len(), self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(usage("point must be finite"));
        }
        Ok(())
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.ln_f(x).exp())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.ln_f(x))
    }

    /// `∇ log f(x) = m(x) − x` where `m(x)` is the posterior mean of the atom.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; self.dim()];
        self.grad_into(x, &mut g);
        Ok(g)
    }

    /// Unchecked log-density for inner loops.
    #[inline]
    pub(crate) fn ln_f(&self, x: &[f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (a, lw) in self.mixing.atoms().zip(&self.log_weights) {
            let e = lw - 0.5 * sq_dist(x, a);
            if e > max {
                max = e;
            }
        }
        let mut s = 0.0;
        for (a, lw) in self.mixing.atoms().zip(&self.log_weights) {
            s += (lw - 0.5 * sq_dist(x, a) - max).exp();
        }
        gauss_log_norm(self.dim()) + max + s.ln()
    }

    /// Unchecked gradient of `log f` written into `out`.
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let mut max = f64::NEG_INFINITY;
        for (a, lw) in self.mixing.atoms().zip(&self.log_weights) {
            max = max.max(lw - 0.5 * sq_dist(x, a));
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut z = 0.0;
        for (a, lw) in self.mixing.atoms().zip(&self.log_weights) {
            let w = (lw - 0.5 * sq_dist(x, a) - max).exp();
            z += w;
            for (o, ai) in out.iter_mut().zip(a) {
                *o += w * ai;
            }
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o = *o / z - xi;
        }
    }

    /// Draws `n` points `θ_K + Z` with `K ~ π`, `Z ~ N(0, I_d)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(usage("sample size must be at least 1"));
        }
        let mut rng = rng::stream(seed);
        let pick = WeightedIndex::new(self.mixing.weights()).map_err(|e| Error::Numerical(e.to_string()))?;
        let d = self.dim();
        let mut points = Vec::with_capacity(n * d);
        for _ in 0..n {
            let k = pick.sample(&mut rng);
            for &c in self.mixing.atom(k) {
                let z: f64 = StandardNormal.sample(&mut rng);
                points.push(c + z);
            }
        }
        Dataset::new(d, points, seed, self.describe())
    }

    pub(crate) fn describe(&self) -> String {
        format!("gmm(dim={}, atoms={})", self.dim(), self.mixing.len())
    }
}

/// `n` points in R^d, with the seed and a description of how they were made.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    pub seed: u64,
    pub source: String,
}

impl Dataset {
    pub fn new(dim: usize, points: Vec<f64>, seed: u64, source: impl Into<String>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(usage("a dataset needs at least one point of positive dimension"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(usage("dataset entries must be finite"));
        }
        Ok(Dataset { dim, points, seed, source: source.into() })
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64, source: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(usage("rows have inconsistent lengths"));
        }
        Self::new(dim, rows.concat(), seed, source)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    /// Per-coordinate `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.points() {
            for (bi, v) in b.iter_mut().zip(p) {
                bi.0 = bi.0.min(*v);
                bi.1 = bi.1.max(*v);
            }
        }
        b
    }
}
