use std::collections::BTreeMap;

use super::*;
use crate::discretize::{build_bracket_family, random_class_member, DiscretizeConfig};
use crate::divergence::{bhattacharyya, hellinger_sq, kl};
use crate::langevin::{evolve, LangevinConfig};
use crate::mixture::{restrict_mass, Dataset};
use crate::npmle::{fit, loglik, near_optimal_perturb};
use crate::polymer::{gen_env, ground_state, overlap};
use crate::stats::{kendall_tau, log_log_slope};

/// One cell of the experiment grid.
#[derive(Clone, Copy, Debug)]
pub(super) struct Task {
    n: usize,
    t: Option<(usize, f64)>,
    eps: Option<(usize, f64)>,
    rep: usize,
}

pub(super) fn grid(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    match cfg.experiment {
        ExperimentKind::Bracketing => {
            for (k, &e) in cfg.eps_list.iter().enumerate() {
                for rep in 0..cfg.reps {
                    out.push(Task { n: 0, t: None, eps: Some((k, e)), rep });
                }
            }
        }
        ExperimentKind::ChaosBc | ExperimentKind::Polymer => {
            for &n in &cfg.n_list {
                for (k, &t) in cfg.t_list.iter().enumerate() {
                    for rep in 0..cfg.reps {
                        out.push(Task { n, t: Some((k, t)), eps: None, rep });
                    }
                }
            }
        }
        _ => {
            for &n in &cfg.n_list {
                for rep in 0..cfg.reps {
                    out.push(Task { n, t: None, eps: None, rep });
                }
            }
        }
    }
    out
}

fn task_seed(cfg: &ExperimentConfig, task: &Task) -> u64 {
    match task.eps {
        Some((k, _)) => row_seed(cfg.master_seed, k, task.rep),
        None => row_seed(cfg.master_seed, task.n, task.rep),
    }
}

pub(super) fn run_task(cfg: &ExperimentConfig, task: Task) -> Row {
    let seed = task_seed(cfg, &task);
    let kind = cfg.experiment;
    let result = match kind {
        ExperimentKind::Stability => stability_row(cfg, task.n, seed),
        ExperimentKind::KlRisk => kl_row(cfg, task.n, seed),
        ExperimentKind::ChaosBc => chaos_row(cfg, task.n, task.t.expect("chaos task has a time"), seed),
        ExperimentKind::Fluctuation => fluctuation_row(cfg, task.n, seed),
        ExperimentKind::Moments => moments_row(cfg, task.n, seed),
        ExperimentKind::Polymer => polymer_row(task.n, task.t.expect("polymer task has a time"), seed),
        ExperimentKind::Bracketing => bracketing_row(cfg, task.eps.expect("bracketing task has an eps").1, seed),
    };
    let (values, error) = match result {
        Ok(v) => (v.into_iter().map(|x| (!x.is_nan()).then_some(x)).collect(), None),
        Err(e) => {
            let e = Error::Replication { n: task.n, rep: task.rep, source: Box::new(e) };
            let mut values = vec![None; kind.columns().len()];
            // the accuracy level is a grid coordinate, kept for grouping
            if let Some((_, eps)) = task.eps {
                values[0] = Some(eps);
            }
            (values, Some(e.to_string()))
        }
    };
    Row { experiment: kind, n: task.n, d: cfg.d, t: task.t.map(|(_, t)| t), rep: task.rep, seed, values, error }
}

/// Recomputes a row of a report produced from `cfg`.
pub fn rerun_row(cfg: &ExperimentConfig, row: &Row) -> Result<Row> {
    if row.experiment != cfg.experiment {
        return Err(usage("row comes from a different experiment"));
    }
    let t = match row.t {
        Some(t) => Some((cfg.t_list.iter().position(|&s| s == t).ok_or_else(|| usage("row time not in t_list"))?, t)),
        None => None,
    };
    let eps = if cfg.experiment == ExperimentKind::Bracketing {
        let e = row.get("eps");
        let k = cfg.eps_list.iter().position(|&s| Some(s) == e).ok_or_else(|| usage("row eps not in eps_list"))?;
        Some((k, cfg.eps_list[k]))
    } else {
        None
    };
    Ok(run_task(cfg, Task { n: row.n, t, eps, rep: row.rep }))
}

fn sample(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<(GmmDensity, Dataset)> {
    let f = cfg.f_star()?;
    let data = f.sample(n, seed)?;
    Ok((f, data))
}

fn stability_row(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (f, data) = sample(cfg, n, seed)?;
    let mut res = fit(&data, &cfg.solver)?;
    let eps = cfg.eps_n.at(n);
    if eps > 0.0 {
        res = near_optimal_perturb(&res, &data, eps, rng::derive_seed(seed, 1))?;
    }
    let h2 = hellinger_sq(&f, &res.density(), &divergence_config(cfg, seed))?.value;
    let env = envelope(n, cfg.d);
    Ok(vec![eps, h2, res.gap, res.loglik, env, h2 / env])
}

fn kl_row(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (f, data) = sample(cfg, n, seed)?;
    let mut res = fit(&data, &cfg.solver)?;
    let eps = cfg.eps_n.at(n);
    if eps > 0.0 {
        res = near_optimal_perturb(&res, &data, eps, rng::derive_seed(seed, 1))?;
    }
    let g = res.density();
    let k = kl(&f, &g, &divergence_config(cfg, seed))?;
    let h2 = hellinger_sq(&f, &g, &exact_where_possible(cfg, seed))?.value;
    let mass = cfg.solver.restriction.as_ref().map_or(f64::NAN, |r| restrict_mass(&res.measure, &r.theta));
    Ok(vec![eps, k.value, k.std_error, h2, res.gap, envelope(n, cfg.d + 1), mass])
}

fn chaos_row(cfg: &ExperimentConfig, n: usize, (k, t): (usize, f64), seed: u64) -> Result<Vec<f64>> {
    let (f, data) = sample(cfg, n, seed)?;
    let base = fit(&data, &cfg.solver)?;
    let lcfg = LangevinConfig { t_final: t, dt: if t > 0.0 { t.min(1e-3) } else { 1e-3 }, seed: rng::derive_seed_path(seed, &[1, k as u64]) };
    let moved = evolve(&data, &f, &lcfg)?;
    let refit = fit(&moved, &cfg.solver)?;
    let dc = divergence_config(cfg, seed);
    let (g, h) = (base.density(), refit.density());
    let bc = bhattacharyya(&g, &h, &dc)?.value;
    let h2 = hellinger_sq(&g, &h, &dc)?.value;
    Ok(vec![bc, h2, 1.0 - bc, base.gap, refit.gap])
}

fn mean_grad_sq(f: &GmmDensity, data: &Dataset) -> Result<f64> {
    let mut s = 0.0;
    for x in data.points() {
        s += f.grad_log_density(x)?.iter().map(|g| g * g).sum::<f64>();
    }
    Ok(s / data.len() as f64)
}

fn fluctuation_row(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (f, data) = sample(cfg, n, seed)?;
    let res = fit(&data, &cfg.solver)?;
    let g = res.density();
    Ok(vec![res.loglik, loglik(&f, &data)?, mean_grad_sq(&g, &data)?, mean_grad_sq(&f, &data)?, res.gap])
}

fn moments_row(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (f, data) = sample(cfg, n, seed)?;
    let res = fit(&data, &cfg.solver)?;
    let star = loglik(&f, &data)?;
    let diff = res.loglik - star;
    let nf = n as f64;
    Ok(vec![res.loglik, star, diff, nf.sqrt() * diff.abs(), nf * diff * diff, res.gap])
}

fn polymer_row(n: usize, (k, t): (usize, f64), seed: u64) -> Result<Vec<f64>> {
    let env = gen_env(n, seed)?;
    let gs = ground_state(&env);
    let moved = env.evolved(t, rng::derive_seed_path(seed, &[1, k as u64]))?;
    Ok(vec![overlap(&gs.path, &ground_state(&moved).path)?, gs.energy])
}

fn bracketing_row(cfg: &ExperimentConfig, eps: f64, seed: u64) -> Result<Vec<f64>> {
    let theta = cfg.theta.as_ref().ok_or_else(|| usage("bracketing needs theta"))?;
    let dcfg = DiscretizeConfig::desk(eps, theta);
    let fam = build_bracket_family(theta, cfg.tau, &dcfg)?;
    let f = random_class_member(theta, cfg.tau, &dcfg.outer_box(cfg.d), seed)?;
    let cov = fam.cover(&f)?;
    let l = (1.0 / eps).ln();
    Ok(vec![
        eps,
        fam.count as f64,
        fam.log_count,
        fam.log_count / l.powi(cfg.d as i32 + 1),
        cov.measured_gap,
        fam.half_width,
        if fam.contains(&cov.member) { 1.0 } else { 0.0 },
        cov.violations as f64,
    ])
}

fn group_key(row: &Row) -> (usize, Option<f64>, Option<f64>) {
    let eps = if row.experiment == ExperimentKind::Bracketing { row.get("eps") } else { None };
    (row.n, row.t, eps)
}

pub(super) fn summarize(cfg: &ExperimentConfig, rows: &[Row]) -> Summary {
    let kind = cfg.experiment;
    let mut groups: Vec<GroupSummary> = Vec::new();
    let mut members: Vec<Vec<&Row>> = Vec::new();
    for row in rows {
        let key = group_key(row);
        let k = match groups.iter().position(|g| (g.n, g.t, g.eps) == key) {
            Some(k) => k,
            None => {
                groups.push(GroupSummary {
                    n: key.0,
                    t: key.1,
                    eps: key.2,
                    rows: 0,
                    failed: 0,
                    columns: BTreeMap::new(),
                    derived: BTreeMap::new(),
                });
                members.push(Vec::new());
                groups.len() - 1
            }
        };
        groups[k].rows += 1;
        if row.ok() {
            members[k].push(row);
        } else {
            groups[k].failed += 1;
        }
    }
    for (g, rs) in groups.iter_mut().zip(&members) {
        for col in kind.columns() {
            let xs: Vec<f64> = rs.iter().filter_map(|r| r.get(col)).filter(|v| !v.is_nan()).collect();
            if let Some(a) = Aggregate::of(&xs) {
                g.columns.insert(col.to_string(), a);
            }
        }
        derive_group(kind, g, rs);
    }
    let trends = trends(cfg, &groups);
    Summary { groups, trends, checks: Vec::new() }
}

fn column(rs: &[&Row], col: &str) -> Vec<f64> {
    rs.iter().filter_map(|r| r.get(col)).collect()
}

fn derive_group(kind: ExperimentKind, g: &mut GroupSummary, rs: &[&Row]) {
    let n = g.n as f64;
    match kind {
        ExperimentKind::Fluctuation if rs.len() > 1 => {
            let n_var_hat = n * variance(&column(rs, "loglik_hat"));
            let grad = mean(&column(rs, "grad_sq_hat"));
            g.derived.insert("n_var_hat".into(), n_var_hat);
            g.derived.insert("n_var_star".into(), n * variance(&column(rs, "loglik_star")));
            g.derived.insert("mean_grad_sq_hat".into(), grad);
            g.derived.insert("mean_grad_sq_star".into(), mean(&column(rs, "grad_sq_star")));
            g.derived.insert("ratio".into(), n_var_hat / grad);
        }
        ExperimentKind::Polymer if rs.len() > 1 => {
            g.derived.insert("var_energy_over_n".into(), variance(&column(rs, "energy")) / n);
        }
        ExperimentKind::Bracketing if !rs.is_empty() => {
            let worst = column(rs, "measured_gap").into_iter().fold(0.0, f64::max);
            g.derived.insert("worst_measured_gap".into(), worst);
            g.derived.insert("all_in_family".into(), column(rs, "in_family").iter().all(|&v| v == 1.0) as u8 as f64);
            g.derived.insert("total_violations".into(), column(rs, "violations").iter().sum());
        }
        _ => {}
    }
}

fn median_of(groups: &[GroupSummary], col: &str) -> Vec<f64> {
    groups.iter().map(|g| g.columns.get(col).map_or(f64::NAN, |a| a.median)).collect()
}

fn trends(cfg: &ExperimentConfig, groups: &[GroupSummary]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if groups.len() < 2 {
        return out;
    }
    let ns: Vec<f64> = groups.iter().map(|g| g.n as f64).collect();
    match cfg.experiment {
        ExperimentKind::Stability => {
            out.insert("log_log_slope_median_h2".into(), log_log_slope(&ns, &median_of(groups, "h2")));
            out.insert("kendall_tau_median_ratio".into(), kendall_tau(&ns, &median_of(groups, "h2_ratio")));
        }
        ExperimentKind::KlRisk => {
            out.insert("log_log_slope_median_kl".into(), log_log_slope(&ns, &median_of(groups, "kl")));
            let m: Vec<f64> = groups.iter().map(|g| g.columns.get("kl").map_or(f64::NAN, |a| a.mean)).collect();
            out.insert("mean_kl_first_over_last".into(), m[0] / m[m.len() - 1]);
        }
        ExperimentKind::ChaosBc | ExperimentKind::Polymer => {
            let col = if cfg.experiment == ExperimentKind::ChaosBc { "one_minus_bc" } else { "overlap" };
            for &t in &cfg.t_list {
                let sel: Vec<&GroupSummary> = groups.iter().filter(|g| g.t == Some(t)).collect();
                if sel.len() > 1 {
                    let x: Vec<f64> = sel.iter().map(|g| g.n as f64).collect();
                    let y: Vec<f64> = sel.iter().map(|g| g.columns.get(col).map_or(f64::NAN, |a| a.mean)).collect();
                    out.insert(format!("kendall_tau_mean_{col}_t={t}"), kendall_tau(&x, &y));
                }
            }
        }
        ExperimentKind::Fluctuation => {
            let get = |k: &str| -> Vec<f64> { groups.iter().map(|g| g.derived.get(k).copied().unwrap_or(f64::NAN)).collect() };
            let spread = |v: &[f64]| {
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
            };
            out.insert("kendall_tau_ratio".into(), kendall_tau(&ns, &get("ratio")));
            out.insert("spread_n_var_hat".into(), spread(&get("n_var_hat")));
            out.insert("spread_mean_grad_sq_hat".into(), spread(&get("mean_grad_sq_hat")));
        }
        ExperimentKind::Moments => {
            let m = |c: &str| -> Vec<f64> { groups.iter().map(|g| g.columns.get(c).map_or(f64::NAN, |a| a.mean)).collect() };
            out.insert("kendall_tau_mean_m1".into(), kendall_tau(&ns, &m("m1")));
            out.insert("kendall_tau_mean_m2".into(), kendall_tau(&ns, &m("m2")));
        }
        ExperimentKind::Bracketing => {}
    }
    out
}
