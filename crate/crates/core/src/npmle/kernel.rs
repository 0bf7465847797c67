use nalgebra::{DMatrix, DVector};

use crate::mixture::Dataset;
use crate::numeric::{gauss_log_norm, sq_dist};

/// Gaussian kernel between data points and a fixed set of atoms, stored
/// row-scaled: `φ(X_i − θ_k) = exp(shift[i]) · scaled[i·k + k]` with the
/// largest entry of each row equal to one.
pub(crate) struct Kernel {
    pub n: usize,
    pub k: usize,
    pub shift: Vec<f64>,
    pub scaled: Vec<f64>,
}

impl Kernel {
    pub fn new(data: &Dataset, atoms: &[f64]) -> Kernel {
        let d = data.dim();
        let k = atoms.len() / d;
        let n = data.len();
        let c = gauss_log_norm(d);
        let mut shift = Vec::with_capacity(n);
        let mut scaled = vec![0.0; n * k];
        for (i, x) in data.points().enumerate() {
            let row = &mut scaled[i * k..(i + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for (r, a) in row.iter_mut().zip(atoms.chunks_exact(d)) {
                *r = -0.5 * sq_dist(x, a);
                max = max.max(*r);
            }
            for r in row.iter_mut() {
                *r = (*r - max).exp();
            }
            shift.push(c + max);
        }
        Kernel { n, k, shift, scaled }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.scaled[i * self.k..(i + 1) * self.k]
    }

    /// Scaled mixture values `s_i = Σ_k w_k E_ik`.
    pub fn mixture(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(w).map(|(e, w)| e * w).sum()).collect()
    }

    /// `ln f(X_i)` per point.
    pub fn log_mix(&self, w: &[f64]) -> Vec<f64> {
        self.mixture(w).iter().zip(&self.shift).map(|(s, c)| c + s.ln()).collect()
    }

    pub fn loglik(&self, w: &[f64]) -> f64 {
        self.log_mix(w).iter().sum::<f64>() / self.n as f64
    }

    /// `D_k = (1/n) Σ_i φ(X_i − θ_k) / f(X_i)` for every atom.
    pub fn directional(&self, w: &[f64]) -> Vec<f64> {
        let s = self.mixture(w);
        self.directional_from(&s)
    }

    pub fn directional_from(&self, s: &[f64]) -> Vec<f64> {
        let mut dk = vec![0.0; self.k];
        for (i, si) in s.iter().enumerate() {
            let inv = 1.0 / si;
            for (d, e) in dk.iter_mut().zip(self.row(i)) {
                *d += e * inv;
            }
        }
        let n = self.n as f64;
        dk.iter_mut().for_each(|d| *d /= n);
        dk
    }

    /// One multiplicative EM update; returns the new weights and the
    /// log-likelihood of the old ones.
    pub fn em_update(&self, w: &[f64]) -> (Vec<f64>, f64) {
        let s = self.mixture(w);
        let ll = s.iter().zip(&self.shift).map(|(s, c)| c + s.ln()).sum::<f64>() / self.n as f64;
        let dk = self.directional_from(&s);
        let mut out: Vec<f64> = w.iter().zip(&dk).map(|(w, d)| w * d).collect();
        let t: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= t);
        (out, ll)
    }

    /// Quadratic model of one constrained Newton step at `w` for the
    /// mass-penalized objective `Σ_i log f(X_i) − n·Σ_k w_k`. With
    /// `S_ik = φ(X_i − θ_k)/f(X_i)` this returns `SᵀS`, `2·Sᵀ1 − n·1` and
    /// `D_k = (1/n) Σ_i S_ik`.
    pub fn newton_system(&self, w: &[f64]) -> (DMatrix<f64>, DVector<f64>, Vec<f64>) {
        let s = self.mixture(w);
        let mut gram = DMatrix::zeros(self.k, self.k);
        let mut col = vec![0.0; self.k];
        let mut sum = vec![0.0; self.k];
        for (i, si) in s.iter().enumerate() {
            for (c, e) in col.iter_mut().zip(self.row(i)) {
                *c = e / si;
            }
            for a in 0..self.k {
                sum[a] += col[a];
                for b in a..self.k {
                    gram[(a, b)] += col[a] * col[b];
                }
            }
        }
        for a in 0..self.k {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let n = self.n as f64;
        let rhs = DVector::from_iterator(self.k, sum.iter().map(|v| 2.0 * v - n));
        (gram, rhs, sum.iter().map(|v| v / n).collect())
    }

    /// Directional derivatives `D(θ_g)` at the kernel's atoms for a mixture
    /// whose per-point log-density is `log_f`.
    pub fn directional_given(&self, log_f: &[f64]) -> Vec<f64> {
        let mut dk = vec![0.0; self.k];
        for (i, lf) in log_f.iter().enumerate() {
            let c = (self.shift[i] - lf).min(690.0).exp();
            for (d, e) in dk.iter_mut().zip(self.row(i)) {
                *d += e * c;
            }
        }
        let n = self.n as f64;
        dk.iter_mut().for_each(|d| *d /= n);
        dk
    }
}
