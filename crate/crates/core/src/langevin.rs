//! Data-perturbing Langevin dynamics.
//!
//! Each point follows `dX = ∇log f*(X) dt + √2 dB` with its own Brownian
//! motion. The dynamics leaves `f*` invariant, so if the data are drawn
//! from `f*` the evolved data are too, while each evolved point stays
//! coupled to its starting point.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::mixture::{Dataset, GmmDensity};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
}

impl LangevinConfig {
    pub fn new(t_final: f64, seed: u64) -> Self {
        LangevinConfig { t_final, dt: 1e-3, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(usage("t_final must be a finite nonnegative number"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(usage("dt must lie in (0, 0.01]"));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(usage("dt must not exceed t_final"));
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_final]`: full steps of `dt` and a shorter
    /// final step when `t_final` is not a multiple of `dt`.
    fn steps(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let full = (ratio + 1e-9).floor();
        let rest = self.t_final - full * self.dt;
        (full as usize, if rest > 1e-12 * self.dt { rest } else { 0.0 })
    }
}

/// Euler–Maruyama evolution of every point to `cfg.t_final`. Point `i` uses
/// the Brownian stream derived from `(cfg.seed, i)`, so the output does not
/// depend on the number of threads.
pub fn evolve(data: &Dataset, f_star: &GmmDensity, cfg: &LangevinConfig) -> Result<Dataset> {
    cfg.validate()?;
    if f_star.dim() != data.dim() {
        return Err(usage(format!("f* has dimension {}, data has {}", f_star.dim(), data.dim())));
    }
    let d = data.dim();
    let (full, rest) = cfg.steps();
    let mut out = data.flat().to_vec();
    out.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
        if full == 0 && rest == 0.0 {
            return;
        }
        let mut rng = rng::child_stream(cfg.seed, i as u64);
        let mut grad = vec![0.0; d];
        let mut step = |x: &mut [f64], h: f64| {
            f_star.grad_into(x, &mut grad);
            let s = (2.0 * h).sqrt();
            for (xi, g) in x.iter_mut().zip(&grad) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi += g * h + s * z;
            }
        };
        for _ in 0..full {
            step(x, cfg.dt);
        }
        if rest > 0.0 {
            step(x, rest);
        }
    });
    Dataset::new(d, out, cfg.seed, format!("langevin(t={}, dt={}) of {}", cfg.t_final, cfg.dt, data.source))
}

/// Exact Ornstein–Uhlenbeck transition `e^{−t} G + √(1 − e^{−2t}) Z`.
pub fn ou_evolve(env: &[f64], t: f64, seed: u64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(usage("OU time must be nonnegative"));
    }
    if t == 0.0 {
        return Ok(env.to_vec());
    }
    let a = (-t).exp();
    let b = (-(-2.0 * t).exp_m1()).sqrt();
    let mut rng = rng::stream(seed);
    Ok(env
        .iter()
        .map(|g| {
            let z: f64 = StandardNormal.sample(&mut rng);
            a * g + b * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixingMeasure;
    use crate::numeric::{mean, variance};
    use crate::stats::{correlation, ks_critical, ks_two_sample};

    fn standard(dim: usize) -> GmmDensity {
        MixingMeasure::dirac(&vec![0.0; dim]).unwrap().into()
    }

    #[test]
    fn config_checks() {
        assert!(LangevinConfig::new(0.0, 1).validate().is_ok());
        assert!(LangevinConfig { t_final: 1.0, dt: 0.02, seed: 0 }.validate().is_err());
        assert!(LangevinConfig { t_final: 0.001, dt: 0.005, seed: 0 }.validate().is_err());
        assert!(LangevinConfig { t_final: -1.0, dt: 0.001, seed: 0 }.validate().is_err());
        let c = LangevinConfig { t_final: 0.0105, dt: 0.002, seed: 0 };
        let (full, rest) = c.steps();
        assert_eq!(full, 5);
        assert!((rest - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn zero_time_is_identity() {
        let data = Dataset::new(2, vec![1.0, 2.0, -3.0, 0.5], 0, "t").unwrap();
        let out = evolve(&data, &standard(2), &LangevinConfig::new(0.0, 9)).unwrap();
        assert_eq!(out.flat(), data.flat());
        assert_eq!(ou_evolve(&[1.0, 2.0], 0.0, 3).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let data = Dataset::new(1, vec![1.0], 0, "t").unwrap();
        assert!(evolve(&data, &standard(2), &LangevinConfig::new(0.1, 0)).is_err());
    }

    #[test]
    fn ou_marginal_from_a_point() {
        let n = 100_000;
        let data = Dataset::new(1, vec![5.0; n], 0, "t").unwrap();
        let cfg = LangevinConfig { t_final: 1.0, dt: 1e-3, seed: 11 };
        let out = evolve(&data, &standard(1), &cfg).unwrap();
        let m = mean(out.flat());
        let v = variance(out.flat());
        assert!((m - 5.0 * (-1.0f64).exp()).abs() < 0.02, "mean {m}");
        let target = 1.0 - (-2.0f64).exp();
        assert!((v / target - 1.0).abs() < 0.02, "variance {v}");
    }

    #[test]
    fn deterministic_given_seed() {
        let f: GmmDensity = MixingMeasure::new(&[vec![-1.0], vec![2.0]], vec![0.4, 0.6]).unwrap().into();
        let data = f.sample(50, 3).unwrap();
        let cfg = LangevinConfig { t_final: 0.05, dt: 1e-3, seed: 4 };
        assert_eq!(evolve(&data, &f, &cfg).unwrap(), evolve(&data, &f, &cfg).unwrap());
    }

    #[test]
    fn ou_correlations() {
        let g: Vec<f64> = standard(1).sample(1_000_000, 5).unwrap().flat().to_vec();
        let far = ou_evolve(&g, 50.0, 6).unwrap();
        assert!(correlation(&g, &far).abs() < 0.005);
        let near = ou_evolve(&g, 0.3, 7).unwrap();
        assert!((correlation(&g, &near) - (-0.3f64).exp()).abs() < 0.01);
        assert!(((-0.3f64).exp() - 0.7408).abs() < 1e-4);
    }

    #[test]
    fn euler_matches_exact_ou() {
        let n = 10_000;
        let t = 0.5;
        let start: Vec<f64> = standard(1).sample(n, 8).unwrap().flat().iter().map(|x| 2.0 + x).collect();
        let data = Dataset::new(1, start.clone(), 0, "t").unwrap();
        let em = evolve(&data, &standard(1), &LangevinConfig { t_final: t, dt: 1e-4, seed: 12 }).unwrap();
        let ex = ou_evolve(&start, t, 13).unwrap();
        let (m1, m2) = (mean(em.flat()), mean(&ex));
        let (v1, v2) = (variance(em.flat()), variance(&ex));
        let se_mean = ((v1 + v2) / n as f64).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se_mean, "{m1} vs {m2}");
        // standard error of a sample variance is about v·√(2/n)
        let se_var = (v1 * v1 + v2 * v2).sqrt() * (2.0 / n as f64).sqrt();
        assert!((v1 - v2).abs() < 3.0 * se_var, "{v1} vs {v2}");
    }

    #[test]
    fn displacement_grows_with_time() {
        let f: GmmDensity = MixingMeasure::new(&[vec![-2.0], vec![2.0]], vec![0.5, 0.5]).unwrap().into();
        let data = f.sample(10_000, 21).unwrap();
        let mut last = 0.0;
        for t in [0.02, 0.05, 0.1, 0.2, 0.4] {
            let out = evolve(&data, &f, &LangevinConfig { t_final: t, dt: 1e-3, seed: 22 }).unwrap();
            let msd = mean(&out.flat().iter().zip(data.flat()).map(|(a, b)| (a - b) * (a - b)).collect::<Vec<_>>());
            assert!(msd > last, "t={t}: {msd} <= {last}");
            last = msd;
        }
    }

    fn invariance_pass_rate(f: &GmmDensity, t: f64, trials: u64) -> f64 {
        let n = 1000;
        let crit = ks_critical(1.628, n, n);
        let mut pass = 0;
        for trial in 0..trials {
            let data = f.sample(n, rng::derive_seed(100, trial)).unwrap();
            let out = evolve(&data, f, &LangevinConfig { t_final: t, dt: 1e-3, seed: rng::derive_seed(200, trial) }).unwrap();
            let fresh = f.sample(n, rng::derive_seed(300, trial)).unwrap();
            let d = f.dim();
            let ok = (0..d).all(|j| {
                let a: Vec<f64> = out.points().map(|p| p[j]).collect();
                let b: Vec<f64> = fresh.points().map(|p| p[j]).collect();
                ks_two_sample(&a, &b) < crit
            });
            pass += ok as u32;
        }
        pass as f64 / trials as f64
    }

    #[test]
    fn preserves_the_mixture() {
        let f: GmmDensity = MixingMeasure::new(&[vec![-2.0, 0.0], vec![1.5, 1.0]], vec![0.3, 0.7]).unwrap().into();
        assert!(invariance_pass_rate(&f, 0.5, 100) >= 0.95);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn config_rules(t in 0.0f64..0.05, dt in 1e-5f64..0.03, zero in proptest::bool::ANY) {
            let t = if zero { 0.0 } else { t };
            let ok = dt <= 0.01 && (t == 0.0 || dt <= t);
            proptest::prop_assert_eq!(LangevinConfig { t_final: t, dt, seed: 0 }.validate().is_ok(), ok);
        }

        #[test]
        fn evolve_keeps_shape(n in 1usize..20, dim in 1usize..3, seed in proptest::prelude::any::<u64>()) {
            let data = standard(dim).sample(n, seed).unwrap();
            let out = evolve(&data, &standard(dim), &LangevinConfig::new(0.01, seed)).unwrap();
            proptest::prop_assert_eq!((out.len(), out.dim()), (n, dim));
            proptest::prop_assert!(out.flat().iter().all(|v| v.is_finite()));
            let same = evolve(&data, &standard(dim), &LangevinConfig::new(0.0, seed)).unwrap();
            proptest::prop_assert_eq!(same.flat(), data.flat());
        }
    }
}
