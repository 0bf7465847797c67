//! Gauss–Legendre rules, composite panel integration over atom
//! neighbourhoods, and a simple adaptive integrator.

use std::collections::BTreeSet;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// ∫_a^b f
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        h * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Union of axis-aligned panels of fixed width covering `±radius`
/// neighbourhoods of a set of centres. Panels are aligned to the global
/// lattice `width·Z^d`, so overlapping neighbourhoods share panels.
#[derive(Clone, Debug)]
pub struct PanelCover {
    pub dim: usize,
    pub width: f64,
    cells: BTreeSet<Vec<i64>>,
}

impl PanelCover {
    pub fn around<'a>(dim: usize, centres: impl IntoIterator<Item = &'a [f64]>, radius: f64, width: f64) -> Self {
        let mut cells = BTreeSet::new();
        for c in centres {
            let ranges: Vec<(i64, i64)> = c
                .iter()
                .map(|v| (((v - radius) / width).floor() as i64, ((v + radius) / width).ceil() as i64 - 1))
                .collect();
            let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                cells.insert(idx.clone());
                let mut j = 0;
                loop {
                    if j == dim {
                        break;
                    }
                    if idx[j] < ranges[j].1 {
                        idx[j] += 1;
                        break;
                    }
                    idx[j] = ranges[j].0;
                    j += 1;
                }
                if j == dim {
                    break;
                }
            }
        }
        PanelCover { dim, width, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Tensor-product Gauss–Legendre integral of `f` over the cover.
    pub fn integrate(&self, rule: &GaussLegendre, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let q = rule.nodes.len();
        let h = 0.5 * self.width;
        let scale = h.powi(self.dim as i32);
        let mut x = vec![0.0; self.dim];
        let mut total = 0.0;
        for cell in &self.cells {
            let mut sub = 0.0;
            let mut idx = vec![0usize; self.dim];
            loop {
                let mut w = 1.0;
                for j in 0..self.dim {
                    let c = (cell[j] as f64 + 0.5) * self.width;
                    x[j] = c + h * rule.nodes[idx[j]];
                    w *= rule.weights[idx[j]];
                }
                sub += w * f(&x);
                let mut j = 0;
                while j < self.dim {
                    idx[j] += 1;
                    if idx[j] < q {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == self.dim {
                    break;
                }
            }
            total += scale * sub;
        }
        total
    }
}

/// Adaptive bisection on a 10-point Gauss–Legendre rule until the two-half
/// estimate agrees with the whole-interval estimate to `tol`.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let rule = GaussLegendre::new(10);
    let whole = rule.integrate(a, b, f);
    adaptive_rec(f, &rule, a, b, whole, tol, 0)
}

fn adaptive_rec(f: &impl Fn(f64) -> f64, rule: &GaussLegendre, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    if depth >= 40 || (left + right - whole).abs() <= tol {
        return left + right;
    }
    adaptive_rec(f, rule, a, m, left, 0.5 * tol, depth + 1) + adaptive_rec(f, rule, m, b, right, 0.5 * tol, depth + 1)
}
