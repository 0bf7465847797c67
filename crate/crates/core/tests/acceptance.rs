//! Acceptance suite: one line per criterion, tolerances and runtime limits
//! pinned below. Run a subset with `ACCEPTANCE_ONLY=name1,name2`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::function::erf::erf;

use mixmech::discretize::{
    build_bracket_family, caratheodory_reduce, discretize_compact, family_log_count, gauss_lipschitz, lattice_project,
    monomials, random_class_member, taylor_remainder_bound, verification_grid, DiscretizeConfig, ENTROPY_D,
};
use mixmech::divergence::{bhattacharyya, hellinger_sq, kl, tv, DivergenceConfig};
use mixmech::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentReport};
use mixmech::langevin::{evolve, ou_evolve, LangevinConfig};
use mixmech::npmle::{build_grid, fit, loglik, Algorithm, GridSpec, Restriction, SolverConfig};
use mixmech::numeric::{mean, variance};
use mixmech::polymer::{chaos_stats, gen_env, ground_state, PolymerEnv};
use mixmech::quadrature::adaptive;
use mixmech::rng::{derive_seed, stream};
use mixmech::stats::{correlation, ks_critical, ks_two_sample};
use mixmech::{restrict_mass, BoxRegion, Dataset, GmmDensity, MixingMeasure};

const GRAD_FD_TOL: f64 = 1e-6;
const GRAD_FD_STEP: f64 = 1e-5;
const NORMALIZATION_TOL: f64 = 1e-8;
const LSE_TOL: f64 = 1e-12;
const DIVERGENCE_QUAD_TOL: f64 = 1e-3;
const DIVERGENCE_MC_SE: f64 = 4.0;
const DIVERGENCE_MC_SAMPLES: usize = 200_000;
const EM_MONOTONE_SLACK: f64 = 1e-12;
const RESTRICTION_TOL: f64 = 1e-12;
const KS_C_ALPHA_1PCT: f64 = 1.628;
const KS_PASS_RATE: f64 = 0.95;
const OU_MEAN_TOL: f64 = 0.02;
const OU_VAR_REL_TOL: f64 = 0.02;
const OU_CORR_TOL: f64 = 0.01;
const MOMENT_TOL: f64 = 1e-10;
const FSTAR_VARIANCE: f64 = 0.5;
const FSTAR_VARIANCE_REL_TOL: f64 = 0.15;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn all(parts: Vec<(bool, String)>) -> Outcome {
    let passed = parts.iter().all(|p| p.0);
    let detail: Vec<String> = parts.into_iter().map(|(ok, s)| format!("{}{s}", if ok { "" } else { "FAILED " })).collect();
    outcome(passed, detail.join("; "))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("core-numerics", Duration::from_secs(10), core_numerics),
        ("divergence-oracles", Duration::from_secs(30), divergence_oracles),
        ("solver", Duration::from_secs(60), solver),
        ("langevin-invariance", Duration::from_secs(60), langevin_invariance),
        ("polymer", Duration::from_secs(180), polymer),
        ("discretize", Duration::from_secs(300), discretize),
        ("stability-trend", Duration::from_secs(600), stability_trend),
        ("kl-trend", Duration::from_secs(600), kl_trend),
        ("chaos-absence", Duration::from_secs(600), chaos_absence),
        ("fluctuation", Duration::from_secs(900), fluctuation),
    ];
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(String::from).collect());
    let mut failed = 0;
    for (name, limit, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == name)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let in_time = took <= limit;
        let passed = result.passed && in_time;
        failed += !passed as usize;
        println!(
            "[{}] {name}: {} ({:.1} s of {} s{})",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over the limit" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn random_density(r: &mut impl Rng, dim: usize) -> GmmDensity {
    let k = r.random_range(1..=5);
    let atoms: Vec<f64> = (0..k * dim).map(|_| r.random_range(-4.0..4.0)).collect();
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    GmmDensity::new(MixingMeasure::from_flat(dim, atoms, w.iter().map(|v| v / s).collect()).unwrap())
}

fn random_point(r: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-radius..radius)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

fn core_numerics() -> Outcome {
    let mut r = stream(1);
    let mut worst_grad = 0.0f64;
    for case in 0..100 {
        let dim = 1 + case % 3;
        let f = random_density(&mut r, dim);
        let x = random_point(&mut r, dim, 10.0);
        let g = f.grad_log_density(&x).unwrap();
        for j in 0..dim {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[j] += GRAD_FD_STEP;
            b[j] -= GRAD_FD_STEP;
            let fd = (f.log_density(&a).unwrap() - f.log_density(&b).unwrap()) / (2.0 * GRAD_FD_STEP);
            worst_grad = worst_grad.max((fd - g[j]).abs());
        }
    }
    let mut worst_norm = 0.0f64;
    for _ in 0..20 {
        let f = random_density(&mut r, 1);
        let l = f.mixing().flat_atoms().iter().fold(0.0f64, |m, a| m.max(a.abs())) + 12.0;
        let total = adaptive(&|x| f.density(&[x]).unwrap(), -l, l, 1e-12);
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    let mut worst_lse = 0.0f64;
    for case in 0..1000 {
        let dim = 1 + case % 3;
        let f = random_density(&mut r, dim);
        let x = random_point(&mut r, dim, 40.0);
        // naive sum, only where it does not underflow
        let norm = (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0);
        let p: f64 = f
            .mixing()
            .atoms()
            .zip(f.mixing().weights())
            .map(|(a, w)| w * norm * (-0.5 * a.iter().zip(&x).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).exp())
            .sum();
        if p > 1e-300 {
            let got = f.log_density(&x).unwrap();
            worst_lse = worst_lse.max((got - p.ln()).abs() / got.abs().max(1.0));
        }
    }
    all(vec![
        (worst_grad <= GRAD_FD_TOL, format!("gradient vs finite differences {worst_grad:.2e} <= {GRAD_FD_TOL:e} over 100 cases")),
        (worst_norm <= NORMALIZATION_TOL, format!("normalization error {worst_norm:.2e} <= {NORMALIZATION_TOL:e}")),
        (worst_lse <= LSE_TOL, format!("log-sum-exp consistency {worst_lse:.2e} <= {LSE_TOL:e}")),
    ])
}

fn divergence_oracles() -> Outcome {
    let quad = DivergenceConfig::quadrature();
    let mut parts = Vec::new();
    let mut worst_quad = 0.0f64;
    let mut worst_z = 0.0f64;
    for (k, delta) in [0.0f64, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let f = GmmDensity::new(MixingMeasure::dirac(&[0.0]).unwrap());
        let g = GmmDensity::new(MixingMeasure::dirac(&[delta]).unwrap());
        let bc = (-delta * delta / 8.0).exp();
        let want_h2 = 2.0 * (1.0 - bc);
        let want_kl = delta * delta / 2.0;
        let want_tv = erf(delta / (2.0 * 2f64.sqrt()));
        let q = [
            hellinger_sq(&f, &g, &quad).unwrap().value - want_h2,
            kl(&f, &g, &quad).unwrap().value - want_kl,
            bhattacharyya(&f, &g, &quad).unwrap().value - bc,
            tv(&f, &g, &quad).unwrap().value - want_tv,
        ];
        worst_quad = q.iter().fold(worst_quad, |m, d| m.max(d.abs()));
        let mc = DivergenceConfig::monte_carlo(DIVERGENCE_MC_SAMPLES, derive_seed(77, k as u64));
        for (est, want) in [
            (hellinger_sq(&f, &g, &mc).unwrap(), want_h2),
            (kl(&f, &g, &mc).unwrap(), want_kl),
            (bhattacharyya(&f, &g, &mc).unwrap(), bc),
            (tv(&f, &g, &mc).unwrap(), want_tv),
        ] {
            let dev = (est.value - want).abs();
            let z = if est.std_error > 0.0 { dev / est.std_error } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
        }
    }
    parts.push((worst_quad <= DIVERGENCE_QUAD_TOL, format!("quadrature error {worst_quad:.2e} <= {DIVERGENCE_QUAD_TOL:e}")));
    parts.push((worst_z <= DIVERGENCE_MC_SE, format!("Monte Carlo within {worst_z:.2} <= {DIVERGENCE_MC_SE} std errors")));
    all(parts)
}

fn solver() -> Outcome {
    let mut r = stream(2);
    let mut non_monotone = 0;
    for inst in 0..50 {
        let f = random_density(&mut r, 1);
        let data = f.sample(100 + 2 * inst, derive_seed(3, inst as u64)).unwrap();
        let cfg = SolverConfig { algorithm: Algorithm::Em, max_iters: 200, ..SolverConfig::default() };
        let res = fit(&data, &cfg).unwrap();
        non_monotone += res.trace.windows(2).filter(|w| w[1] < w[0] - EM_MONOTONE_SLACK).count();
    }
    // certificate soundness: no reweighting on the probe grid beats loglik + gap
    let f = GmmDensity::new(MixingMeasure::new(&[vec![-2.0], vec![0.5], vec![2.0]], vec![0.3, 0.2, 0.5]).unwrap());
    let data = f.sample(300, 4).unwrap();
    let res = fit(&data, &SolverConfig::default()).unwrap();
    let grid = build_grid(&GridSpec::Auto, &data).unwrap();
    let mut unsound = 0;
    let mut best_excess = f64::NEG_INFINITY;
    for trial in 0..100 {
        let k = r.random_range(1..=8);
        let atoms: Vec<f64> = (0..k).map(|_| grid.point(r.random_range(0..grid.len()))[0]).collect();
        let mut w: Vec<f64> = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
        if trial % 2 == 0 {
            // start near the fit to probe the tight regime
            let mut a = res.measure.flat_atoms().to_vec();
            let mut ww: Vec<f64> = res.measure.weights().iter().map(|v| v * r.random_range(0.8..1.2)).collect();
            a.extend(&atoms);
            ww.extend(w.iter().map(|v| v * 0.01));
            let s: f64 = ww.iter().sum();
            let nu = GmmDensity::new(MixingMeasure::from_flat(1, a, ww.iter().map(|v| v / s).collect()).unwrap());
            let excess = loglik(&nu, &data).unwrap() - res.loglik;
            best_excess = best_excess.max(excess);
            unsound += (excess > res.gap + 1e-12) as usize;
            continue;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let nu = GmmDensity::new(MixingMeasure::from_flat(1, atoms, w).unwrap());
        let excess = loglik(&nu, &data).unwrap() - res.loglik;
        best_excess = best_excess.max(excess);
        unsound += (excess > res.gap + 1e-12) as usize;
    }
    // a single observation: the optimum is the point mass at the data point
    let mut worst_single = 0.0f64;
    let spacing = 0.05;
    for s in 0..10 {
        let x = r.random_range(-3.0..3.0);
        let data = Dataset::new(1, vec![x], s, "single").unwrap();
        let cfg = SolverConfig { grid: GridSpec::Box { region: BoxRegion::cube(1, -4.0, 4.0).unwrap(), spacing }, ..SolverConfig::default() };
        let res = fit(&data, &cfg).unwrap();
        let heavy = (0..res.measure.len()).max_by(|&a, &b| res.measure.weights()[a].total_cmp(&res.measure.weights()[b])).unwrap();
        worst_single = worst_single.max((res.measure.atom(heavy)[0] - x).abs());
    }
    let theta = BoxRegion::cube(1, -1.0, 1.0).unwrap();
    let far = GmmDensity::new(MixingMeasure::dirac(&[4.0]).unwrap()).sample(300, 8).unwrap();
    let mut worst_mass = f64::INFINITY;
    for (tau, alg) in [(0.2, Algorithm::Em), (0.5, Algorithm::VertexDirection), (0.8, Algorithm::Hybrid)] {
        let cfg = SolverConfig { algorithm: alg, restriction: Some(Restriction { theta: theta.clone(), tau }), ..SolverConfig::default() };
        let res = fit(&far, &cfg).unwrap();
        worst_mass = worst_mass.min(restrict_mass(&res.measure, &theta) - tau);
    }
    all(vec![
        (non_monotone == 0, format!("EM traces monotone on 50 instances ({non_monotone} drops)")),
        (unsound == 0, format!("certificate sound against 100 reweightings (max excess {best_excess:.2e}, gap {:.2e})", res.gap)),
        (worst_single <= spacing, format!("n = 1 optimum within {worst_single:.3} <= grid spacing {spacing}")),
        (worst_mass >= -RESTRICTION_TOL, format!("restricted mass minus tau >= {worst_mass:.2e}")),
    ])
}

fn invariance_pass_rate(f: &GmmDensity, t: f64, trials: u64) -> f64 {
    let n = 1000;
    let crit = ks_critical(KS_C_ALPHA_1PCT, n, n);
    let mut pass = 0;
    for trial in 0..trials {
        let data = f.sample(n, derive_seed(100, trial)).unwrap();
        let out = evolve(&data, f, &LangevinConfig { t_final: t, dt: 1e-3, seed: derive_seed(200, trial) }).unwrap();
        let fresh = f.sample(n, derive_seed(300, trial)).unwrap();
        let ok = (0..f.dim()).all(|j| {
            let a: Vec<f64> = out.points().map(|p| p[j]).collect();
            let b: Vec<f64> = fresh.points().map(|p| p[j]).collect();
            ks_two_sample(&a, &b) < crit
        });
        pass += ok as u32;
    }
    pass as f64 / trials as f64
}

fn langevin_invariance() -> Outcome {
    let f = GmmDensity::new(MixingMeasure::new(&[vec![-2.0], vec![2.0]], vec![0.5, 0.5]).unwrap());
    let mut parts = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let rate = invariance_pass_rate(&f, t, 100);
        parts.push((rate >= KS_PASS_RATE, format!("KS pass rate at t = {t}: {rate:.2}")));
    }
    // OU from a point: mean 5e^{-1}, variance 1 − e^{-2}
    let standard = GmmDensity::new(MixingMeasure::dirac(&[0.0]).unwrap());
    let start = Dataset::new(1, vec![5.0; 100_000], 0, "point").unwrap();
    let out = evolve(&start, &standard, &LangevinConfig { t_final: 1.0, dt: 1e-3, seed: 11 }).unwrap();
    let (m, v) = (mean(out.flat()), variance(out.flat()));
    let want_v = 1.0 - (-2.0f64).exp();
    parts.push(((m - 5.0 * (-1.0f64).exp()).abs() < OU_MEAN_TOL, format!("OU mean {m:.4}")));
    parts.push(((v / want_v - 1.0).abs() < OU_VAR_REL_TOL, format!("OU variance {v:.4} vs {want_v:.4}")));
    let g: Vec<f64> = standard.sample(1_000_000, 5).unwrap().flat().to_vec();
    let c = correlation(&g, &ou_evolve(&g, 0.3, 7).unwrap());
    parts.push(((c - (-0.3f64).exp()).abs() < OU_CORR_TOL, format!("OU correlation at t = 0.3: {c:.4}")));
    all(parts)
}

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

fn polymer() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed % 8) as usize;
        let env = gen_env(n, seed).unwrap();
        let gs = ground_state(&env);
        mismatches += (gs.energy != brute_force(&env) || env.energy(&gs.path) != gs.energy) as usize;
    }
    // ∂E/∂G_v = −1 on the ground state, 0 elsewhere, so ‖∇E‖² = n + 1
    let (n, h) = (12, 1e-6);
    let mut worst_indicator = 0.0f64;
    for seed in 0..5 {
        let env = gen_env(n, 500 + seed).unwrap();
        let gs = ground_state(&env);
        let mut sq = 0.0;
        for i in 0..=n {
            for j in -(n as i64)..=(n as i64) {
                let mut e = env.clone();
                e.set(i, j, env.get(i, j) + h);
                let g = (ground_state(&e).energy - gs.energy) / h;
                let want = if gs.path[i] == j { -1.0 } else { 0.0 };
                worst_indicator = worst_indicator.max((g - want).abs());
                sq += g * g;
            }
        }
        worst_indicator = worst_indicator.max((sq - (n + 1) as f64).abs() / (n + 1) as f64);
    }
    let sizes = [50, 100, 200, 400];
    let var: Vec<f64> = sizes.iter().map(|&n| chaos_stats(n, &[0.0], 200, 1000 + n as u64).unwrap()[0].var_energy_over_n).collect();
    let rows = chaos_stats(200, &[0.05, 50.0], 50, 31).unwrap();
    all(vec![
        (mismatches == 0, format!("DP equals brute force on 100 seeds, n <= 8 ({mismatches} mismatches)")),
        (worst_indicator < 1e-4, format!("gradient-indicator identity error {worst_indicator:.1e}")),
        (var[3] < var[0], format!("Var(E)/n at n = 50..400: {var:.3?}")),
        (
            rows[1].mean_overlap < rows[0].mean_overlap,
            format!("overlap {:.3} at t = 50 vs {:.3} at t = 0.05", rows[1].mean_overlap, rows[0].mean_overlap),
        ),
    ])
}

fn sup_gap(a: &MixingMeasure, b: &MixingMeasure, grid: &[f64]) -> f64 {
    let (f, g) = (GmmDensity::new(a.clone()), GmmDensity::new(b.clone()));
    grid.iter().map(|&x| (f.density(&[x]).unwrap() - g.density(&[x]).unwrap()).abs()).fold(0.0, f64::max)
}

fn discretize() -> Outcome {
    let mut r = stream(3);
    let mut worst_moment = 0.0f64;
    let mut too_many = 0;
    for case in 0..50 {
        let dim = 1 + case % 2;
        let k = r.random_range(5..60);
        let atoms: Vec<f64> = (0..k * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let mu = MixingMeasure::uniform(dim, atoms).unwrap();
        let funcs = monomials(dim, 1 + case % 3);
        let out = caratheodory_reduce(&mu, &funcs).unwrap();
        too_many += (out.len() > funcs.len() + 1) as usize;
        for h in &funcs {
            worst_moment = worst_moment.max((mu.expect(|x| h(x)) - out.expect(|x| h(x))).abs());
        }
    }
    let theta = BoxRegion::cube(1, -1.0, 1.0).unwrap();
    let cfg = DiscretizeConfig::desk(0.3, &theta);
    let grid = verification_grid(1, cfg.radius).unwrap();
    let taylor = taylor_remainder_bound(1, (2.0 * cfg.radius).powi(2), 6);
    let mut worst_taylor_ratio = 0.0f64;
    for s in 0..10 {
        let atoms: Vec<f64> = (0..300).map(|_| r.random_range(-1.0..1.0)).collect();
        let mu = MixingMeasure::uniform(1, atoms).unwrap();
        let out = discretize_compact(&mu, &theta, &DiscretizeConfig { t: 6, ..cfg.clone() }).unwrap();
        let _ = s;
        worst_taylor_ratio = worst_taylor_ratio.max(sup_gap(&mu, &out, &grid) / taylor);
    }
    let region = BoxRegion::cube(1, -4.0, 4.0).unwrap();
    let mut worst_lattice_ratio = 0.0f64;
    for _ in 0..20 {
        let k = r.random_range(1..8);
        let atoms: Vec<f64> = (0..k).map(|_| r.random_range(-4.0..4.0)).collect();
        let mu = MixingMeasure::uniform(1, atoms).unwrap();
        for (delta, gamma) in [(0.1, 0.05), (0.6, 0.5), (0.02, 0.01)] {
            let out = lattice_project(&mu, delta, gamma, &region).unwrap();
            let bound = mu.len() as f64 * (gauss_lipschitz(1) * delta + 2.0 * gamma);
            worst_lattice_ratio = worst_lattice_ratio.max(sup_gap(&mu, &out, &grid) / bound);
        }
    }
    let fam = build_bracket_family(&theta, 0.5, &cfg).unwrap();
    let mut coverage_failures = 0;
    let mut worst_cover = 0.0f64;
    for s in 0..20 {
        let f = random_class_member(&theta, 0.5, &cfg.outer_box(1), derive_seed(9, s)).unwrap();
        let cov = fam.cover(&f).unwrap();
        coverage_failures += (!fam.contains(&cov.member) || cov.violations > 0 || cov.measured_gap > fam.half_width) as usize;
        worst_cover = worst_cover.max(cov.measured_gap);
    }
    let mut entropy = Vec::new();
    for eps in [0.3f64, 0.1] {
        let c = DiscretizeConfig::desk(eps, &theta);
        let fam = build_bracket_family(&theta, 0.5, &c).unwrap();
        let l = (1.0 / eps).ln();
        let recount = family_log_count(fam.lattice_len() as f64, (1.0 / c.gamma).round(), c.max_atoms);
        entropy.push((fam.log_count <= ENTROPY_D * l * l && (recount - fam.log_count).abs() < 1e-9, fam.log_count / (l * l)));
    }
    all(vec![
        (worst_moment <= MOMENT_TOL && too_many == 0, format!("moments preserved to {worst_moment:.1e} with <= m+1 atoms")),
        (worst_taylor_ratio < 1.0, format!("compact gap / Taylor bound {worst_taylor_ratio:.2e} at t = 6")),
        (worst_lattice_ratio <= 1.0, format!("lattice gap / m(C d delta + 2 gamma) {worst_lattice_ratio:.3}")),
        (coverage_failures == 0, format!("20 random members covered (worst gap {worst_cover:.3}, half-width {:.3})", fam.half_width)),
        (
            entropy.iter().all(|e| e.0),
            format!("log count / (log 1/eps)^2 = {:.2}, {:.2} <= D = {ENTROPY_D}", entropy[0].1, entropy[1].1),
        ),
    ])
}

fn report_outcome(report: &ExperimentReport, extra: Vec<(bool, String)>) -> Outcome {
    let mut parts: Vec<(bool, String)> = report
        .summary
        .checks
        .iter()
        .map(|c| (c.passed, if c.detail.is_empty() { c.name.clone() } else { format!("{} ({})", c.name, c.detail) }))
        .collect();
    parts.extend(extra);
    all(parts)
}

fn experiment(kind: ExperimentKind, edit: impl FnOnce(&mut ExperimentConfig)) -> ExperimentReport {
    let mut cfg = ExperimentConfig::preset(kind);
    cfg.checks = true;
    edit(&mut cfg);
    run(&cfg).unwrap()
}

fn stability_trend() -> Outcome {
    let report = experiment(ExperimentKind::Stability, |c| {
        c.n_list = vec![100, 400, 1600, 6400];
        c.reps = 30;
    });
    report_outcome(&report, vec![])
}

fn kl_trend() -> Outcome {
    let report = experiment(ExperimentKind::KlRisk, |c| {
        c.n_list = vec![100, 400, 1600, 6400];
        c.reps = 30;
    });
    report_outcome(&report, vec![])
}

fn chaos_absence() -> Outcome {
    let report = experiment(ExperimentKind::ChaosBc, |c| {
        c.n_list = vec![200, 800, 3200];
        c.t_list = vec![0.1];
        c.reps = 30;
    });
    report_outcome(&report, vec![])
}

fn fluctuation() -> Outcome {
    let moments = experiment(ExperimentKind::Moments, |c| {
        c.n_list = vec![200, 800, 3200];
        c.reps = 100;
    });
    let fluct = experiment(ExperimentKind::Fluctuation, |c| {
        c.n_list = vec![200, 400, 800, 1600, 3200];
        c.reps = 100;
    });
    // f* = δ_0: n·Var(L_n(f*)) = Var(X²/2) = 1/2
    let f = GmmDensity::new(MixingMeasure::dirac(&[0.0]).unwrap());
    let n = 1000;
    let values: Vec<f64> = (0..200).map(|rep| loglik(&f, &f.sample(n, derive_seed(41, rep)).unwrap()).unwrap()).collect();
    let nv = n as f64 * variance(&values);
    let sanity = ((nv / FSTAR_VARIANCE - 1.0).abs() <= FSTAR_VARIANCE_REL_TOL, format!("n Var(L_n(f*)) = {nv:.3} vs 1/2"));
    let mut parts: Vec<(bool, String)> = Vec::new();
    for r in [&moments, &fluct] {
        parts.extend(r.summary.checks.iter().map(|c| (c.passed, format!("{} ({})", c.name, c.detail))));
    }
    parts.push(sanity);
    all(parts)
}
