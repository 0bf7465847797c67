//! The (1+1)-dimensional Gaussian directed polymer.
//!
//! A path starts at `(0, 0)` and moves one layer right per step, changing
//! height by at most one. Its energy is minus the sum of the Gaussian
//! weights it visits, layer 0 included. The ground state is found by
//! dynamic programming over layers.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{usage, Result};
use crate::langevin::ou_evolve;
use crate::numeric::{mean, variance};
use crate::rng;

/// Weights `G_(i,j)` for `0 ≤ i ≤ n`, `−n ≤ j ≤ n`, row-major in `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolymerEnv {
    n: usize,
    weights: Vec<f64>,
    pub seed: u64,
}

impl PolymerEnv {
    pub fn from_weights(n: usize, weights: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(usage("polymer length must be at least 1"));
        }
        if weights.len() != (n + 1) * (2 * n + 1) {
            return Err(usage(format!("environment needs {} weights, got {}", (n + 1) * (2 * n + 1), weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(usage("environment weights must be finite"));
        }
        Ok(PolymerEnv { n, weights, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        2 * self.n + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: i64) -> f64 {
        self.weights[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: i64, value: f64) {
        let k = self.index(i, j);
        self.weights[k] = value;
    }

    fn index(&self, i: usize, j: i64) -> usize {
        i * self.width() + (j + self.n as i64) as usize
    }

    /// Energy `−Σ G_v` of a path.
    pub fn energy(&self, path: &[i64]) -> f64 {
        -path.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum::<f64>()
    }

    /// The same environment after an exact OU evolution for time `t`.
    pub fn evolved(&self, t: f64, seed: u64) -> Result<PolymerEnv> {
        PolymerEnv::from_weights(self.n, ou_evolve(&self.weights, t, seed)?, seed)
    }
}

/// I.i.d. standard Gaussian environment.
pub fn gen_env(n: usize, seed: u64) -> Result<PolymerEnv> {
    if n == 0 {
        return Err(usage("polymer length must be at least 1"));
    }
    let mut rng = rng::stream(seed);
    let weights = (0..(n + 1) * (2 * n + 1)).map(|_| StandardNormal.sample(&mut rng)).collect();
    PolymerEnv::from_weights(n, weights, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundState {
    pub energy: f64,
    pub path: Vec<i64>,
}

/// Minimum-energy path. Ties go to the height closest to zero, then to
/// the smaller height, both at the final layer and when backtracking.
pub fn ground_state(env: &PolymerEnv) -> GroundState {
    let n = env.n;
    let w = env.width();
    let off = n as i64;
    let mut best = vec![f64::INFINITY; (n + 1) * w];
    best[off as usize] = -env.get(0, 0);
    for i in 1..=n {
        for j in -(i as i64)..=(i as i64) {
            let prev = (j - 1..=j + 1)
                .filter(|p| p.abs() <= off)
                .map(|p| best[(i - 1) * w + (p + off) as usize])
                .fold(f64::INFINITY, f64::min);
            best[i * w + (j + off) as usize] = prev - env.get(i, j);
        }
    }
    let pick = |i: usize, cands: &mut dyn Iterator<Item = i64>| -> i64 {
        let mut choice: Option<(i64, f64)> = None;
        for j in cands {
            let v = best[i * w + (j + off) as usize];
            let better = match choice {
                None => true,
                Some((cj, cv)) => v < cv || (v == cv && (j.abs(), j) < (cj.abs(), cj)),
            };
            if better {
                choice = Some((j, v));
            }
        }
        choice.expect("nonempty candidate set").0
    };
    let mut path = vec![0i64; n + 1];
    path[n] = pick(n, &mut (-off..=off));
    for i in (1..n).rev() {
        let j = path[i + 1];
        path[i] = pick(i, &mut (j - 1..=j + 1).filter(|p| p.abs() <= i as i64));
    }
    GroundState { energy: env.energy(&path), path }
}

/// Fraction of layers where the two paths sit at the same height.
pub fn overlap(p: &[i64], q: &[i64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(usage("overlap needs two nonempty paths of equal length"));
    }
    Ok(p.iter().zip(q).filter(|(a, b)| a == b).count() as f64 / p.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    pub t: f64,
    pub mean_overlap: f64,
    pub var_energy_over_n: f64,
}

/// Replication `rep` of the chaos experiment: ground-state energy and the
/// overlap with the ground state of the environment evolved to each `t`.
pub fn polymer_replicate(n: usize, t_list: &[f64], seed: u64, rep: usize) -> Result<(f64, Vec<f64>)> {
    let env = gen_env(n, rng::derive_seed(seed, rep as u64))?;
    let gs = ground_state(&env);
    let overlaps = t_list
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let moved = env.evolved(t, rng::derive_seed_path(seed, &[rep as u64, k as u64 + 1]))?;
            overlap(&gs.path, &ground_state(&moved).path)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((gs.energy, overlaps))
}

/// Mean overlap between the ground state and the ground state after an
/// OU evolution of the environment, for each `t`, plus `Var(Ê_n)/n` over
/// the replications.
pub fn chaos_stats(n: usize, t_list: &[f64], reps: usize, seed: u64) -> Result<Vec<ChaosRow>> {
    if reps < 2 {
        return Err(usage("chaos statistics need at least 2 replications"));
    }
    if t_list.iter().any(|t| !(*t >= 0.0)) {
        return Err(usage("times must be nonnegative"));
    }
    let per_rep: Vec<(f64, Vec<f64>)> =
        (0..reps).into_par_iter().map(|rep| polymer_replicate(n, t_list, seed, rep)).collect::<Result<_>>()?;
    let energies: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let var_over_n = variance(&energies) / n as f64;
    Ok(t_list
        .iter()
        .enumerate()
        .map(|(k, &t)| ChaosRow {
            n,
            t,
            mean_overlap: mean(&per_rep.iter().map(|r| r.1[k]).collect::<Vec<_>>()),
            var_energy_over_n: var_over_n,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum over all 3^n paths; ties keep the first path found.
    fn brute_force(env: &PolymerEnv) -> f64 {
        let n = env.n();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut path = vec![0i64];
            for _ in 0..n {
                path.push(path.last().unwrap() + (c % 3) as i64 - 1);
                c /= 3;
            }
            best = best.min(env.energy(&path));
        }
        best
    }

    fn feasible(p: &[i64]) -> bool {
        p[0] == 0 && p.windows(2).all(|w| (w[1] - w[0]).abs() <= 1)
    }

    #[test]
    fn env_is_seeded_and_standard() {
        assert_eq!(gen_env(5, 1).unwrap(), gen_env(5, 1).unwrap());
        assert_ne!(gen_env(5, 1).unwrap(), gen_env(5, 2).unwrap());
        let env = gen_env(707, 3).unwrap();
        assert!(env.weights().len() >= 1_000_000);
        assert!(mean(env.weights()).abs() < 0.004);
        assert!((variance(env.weights()) - 1.0).abs() < 0.01);
        assert!(gen_env(0, 1).is_err());
        assert!(PolymerEnv::from_weights(2, vec![0.0; 14], 0).is_err());
    }

    #[test]
    fn hand_case_n1() {
        let mut env = PolymerEnv::from_weights(1, vec![0.0; 6], 0).unwrap();
        env.set(1, -1, 0.2);
        env.set(1, 0, 1.0);
        env.set(1, 1, -0.5);
        let gs = ground_state(&env);
        assert_eq!(gs.path, vec![0, 0]);
        assert!((gs.energy + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_environment_gives_flat_path() {
        let env = PolymerEnv::from_weights(6, vec![0.0; 7 * 13], 0).unwrap();
        let gs = ground_state(&env);
        assert_eq!(gs.energy, 0.0);
        assert_eq!(gs.path, vec![0; 7]);
    }

    #[test]
    fn dp_matches_brute_force() {
        for n in 1..=8 {
            for seed in 0..100 {
                let env = gen_env(n, rng::derive_seed(n as u64, seed)).unwrap();
                let gs = ground_state(&env);
                assert!(feasible(&gs.path));
                assert_eq!(gs.energy, brute_force(&env), "n={n} seed={seed}");
            }
        }
    }

    #[test]
    fn overlap_cases() {
        assert_eq!(overlap(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert!((overlap(&[0, 1, 2, 3], &[0, -1, -2, -3]).unwrap() - 0.25).abs() < 1e-15);
        assert!((overlap(&[0, 1, 2, 2, 1], &[0, 1, 0, 1, 1]).unwrap() - 0.6).abs() < 1e-15);
        assert!(overlap(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn energy_gradient_is_path_indicator() {
        let n = 10;
        let h = 1e-6;
        for seed in 0..5 {
            let env = gen_env(n, 50 + seed).unwrap();
            let gs = ground_state(&env);
            let mut sq_norm = 0.0;
            for i in 0..=n {
                for j in -(n as i64)..=(n as i64) {
                    let mut e = env.clone();
                    e.set(i, j, env.get(i, j) + h);
                    let g = (ground_state(&e).energy - gs.energy) / h;
                    let expect = if gs.path[i] == j { -1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-4, "({i},{j}): {g}");
                    sq_norm += g * g;
                }
            }
            assert!((sq_norm - (n + 1) as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn chaos_extremes() {
        let rows = chaos_stats(200, &[0.0, 0.05, 50.0], 50, 9).unwrap();
        assert_eq!(rows[0].mean_overlap, 1.0);
        assert!(rows[2].mean_overlap < rows[1].mean_overlap);
        assert!(chaos_stats(10, &[0.0], 1, 0).is_err());
    }

    #[test]
    fn energy_variance_is_sublinear() {
        let small = chaos_stats(50, &[0.0], 200, 10).unwrap()[0].var_energy_over_n;
        let large = chaos_stats(400, &[0.0], 200, 11).unwrap()[0].var_energy_over_n;
        assert!(large < small, "{large} >= {small}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ground_state_is_feasible_and_consistent(n in 1usize..30, seed in any::<u64>()) {
            let env = gen_env(n, seed).unwrap();
            let gs = ground_state(&env);
            prop_assert_eq!(gs.path.len(), n + 1);
            prop_assert!(feasible(&gs.path));
            prop_assert!((gs.energy - env.energy(&gs.path)).abs() <= 1e-9);
        }

        #[test]
        fn overlap_in_unit_interval(n in 1usize..20, s1 in any::<u64>(), s2 in any::<u64>()) {
            let p = ground_state(&gen_env(n, s1).unwrap()).path;
            let q = ground_state(&gen_env(n, s2).unwrap()).path;
            let o = overlap(&p, &q).unwrap();
            prop_assert!(o >= 1.0 / (n + 1) as f64 && o <= 1.0);
        }
    }
}
