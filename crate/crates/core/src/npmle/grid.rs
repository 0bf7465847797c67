use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::mixture::{BoxRegion, Dataset};

/// How candidate atom locations are laid out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    /// Data-driven default resolution over the data range padded by one.
    Auto,
    /// Lattice `lo + k·spacing` inside a box.
    Box { region: BoxRegion, spacing: f64 },
}

impl GridSpec {
    /// Parses `auto` or `lo1,hi1[,lo2,hi2...]:spacing`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(GridSpec::Auto);
        }
        let (b, sp) = s.split_once(':').ok_or_else(|| usage(format!("grid {s:?} is neither 'auto' nor '<box>:<spacing>'")))?;
        let spacing: f64 = sp.trim().parse().map_err(|e| usage(format!("bad grid spacing {sp:?}: {e}")))?;
        if !(spacing > 0.0) {
            return Err(usage("grid spacing must be positive"));
        }
        Ok(GridSpec::Box { region: BoxRegion::parse(b)?, spacing })
    }
}

/// A tensor grid of candidate atoms, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomGrid {
    pub dim: usize,
    pub points: Vec<f64>,
    /// Per-axis spacing; zero on degenerate axes.
    pub spacing: Vec<f64>,
}

impl AtomGrid {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, g: usize) -> &[f64] {
        &self.points[g * self.dim..(g + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn tensor(axes: &[Vec<f64>]) -> AtomGrid {
        let dim = axes.len();
        let spacing = axes
            .iter()
            .map(|a| if a.len() > 1 { (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64 } else { 0.0 })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        // last axis varies fastest
        for flat in 0..total {
            let mut r = flat;
            for j in (0..dim).rev() {
                idx[j] = r % axes[j].len();
                r /= axes[j].len();
            }
            points.extend(idx.iter().zip(axes).map(|(&i, a)| a[i]));
        }
        AtomGrid { dim, points, spacing }
    }

    /// Keeps only points inside `region`.
    pub fn restricted_to(&self, region: &BoxRegion) -> AtomGrid {
        let points = self.iter().filter(|p| region.contains(p)).flatten().copied().collect();
        AtomGrid { dim: self.dim, points, spacing: self.spacing.clone() }
    }
}

/// Number of points per axis used by [`GridSpec::Auto`].
///
/// d = 1: ⌈10·√n⌉ capped at 2000; d = 2: ⌈4·n^{1/3}⌉ capped at 80;
/// d = 3: ⌈3·n^{1/4}⌉ capped at 30.
pub fn auto_points_per_axis(n: usize, dim: usize) -> usize {
    let n = n as f64;
    let k = match dim {
        1 => (10.0 * n.sqrt()).ceil().min(2000.0),
        2 => (4.0 * n.cbrt()).ceil().min(80.0),
        _ => (3.0 * n.powf(0.25)).ceil().min(30.0),
    };
    (k as usize).max(2)
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

pub fn build_grid(spec: &GridSpec, data: &Dataset) -> Result<AtomGrid> {
    let dim = data.dim();
    let axes: Vec<Vec<f64>> = match spec {
        GridSpec::Auto => {
            if dim > 3 {
                return Err(usage("automatic grids support d <= 3"));
            }
            let k = auto_points_per_axis(data.len(), dim);
            data.bounds().into_iter().map(|(lo, hi)| linspace(lo - 1.0, hi + 1.0, k)).collect()
        }
        GridSpec::Box { region, spacing } => {
            if region.dim() != dim {
                return Err(usage(format!("grid box has dimension {}, data has {dim}", region.dim())));
            }
            region
                .lo
                .iter()
                .zip(&region.hi)
                .map(|(&lo, &hi)| {
                    let k = ((hi - lo) / spacing + 1e-9).floor() as usize + 1;
                    (0..k).map(|i| lo + i as f64 * spacing).collect()
                })
                .collect()
        }
    };
    let grid = AtomGrid::tensor(&axes);
    if grid.len() > 4_000_000 {
        return Err(usage(format!("grid of {} points is too large", grid.len())));
    }
    Ok(grid)
}
