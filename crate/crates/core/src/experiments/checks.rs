//! Trend checks evaluated on finished reports.

use serde::{Deserialize, Serialize};

use super::{ExperimentKind, ExperimentReport, GroupSummary};
use crate::discretize::ENTROPY_D;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.to_string(), passed, detail }
}

pub const KL_SLOPE_BAND: (f64, f64) = (-1.35, -0.6);
pub const KL_SE_MULTIPLE: f64 = 4.0;
pub const RESTRICTED_KL_FACTOR: f64 = 3.0;
pub const BC_IDENTITY_TOL: f64 = 1e-9;
pub const RATIO_BAND: (f64, f64) = (0.02, 50.0);
pub const RATIO_KENDALL_MAX: f64 = 0.6;
pub const SPREAD_MAX: f64 = 10.0;
/// Slack for quadrature and certificate round-off in row-wise inequalities.
pub const ROW_TOL: f64 = 1e-9;

fn strictly_decreasing(v: &[f64]) -> bool {
    v.len() > 1 && v.windows(2).all(|w| w[1] < w[0])
}

fn means(groups: &[&GroupSummary], col: &str) -> Vec<f64> {
    groups.iter().map(|g| g.columns.get(col).map_or(f64::NAN, |a| a.mean)).collect()
}

fn medians(groups: &[&GroupSummary], col: &str) -> Vec<f64> {
    groups.iter().map(|g| g.columns.get(col).map_or(f64::NAN, |a| a.median)).collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Evaluates the checks that apply to the report's experiment.
pub fn evaluate_checks(report: &ExperimentReport) -> Vec<CheckOutcome> {
    let cfg = &report.metadata.config;
    let groups: Vec<&GroupSummary> = report.summary.groups.iter().collect();
    let trend = |k: &str| report.summary.trends.get(k).copied().unwrap_or(f64::NAN);
    let mut out = vec![outcome(
        "no failed replications",
        report.failed_rows() == 0,
        format!("{} of {} rows failed", report.failed_rows(), report.rows.len()),
    )];
    match cfg.experiment {
        ExperimentKind::Stability => {
            let m = medians(&groups, "h2");
            out.push(outcome("median H2 strictly decreasing in n", strictly_decreasing(&m), fmt(&m)));
            let tau = trend("kendall_tau_median_ratio");
            out.push(outcome("Kendall tau of median H2 n/(log n)^(d+1) <= 0", tau <= 0.0, format!("tau = {tau:.3}")));
        }
        ExperimentKind::KlRisk => {
            let s = trend("log_log_slope_median_kl");
            out.push(outcome(
                "log-log slope of median KL in band",
                s >= KL_SLOPE_BAND.0 && s <= KL_SLOPE_BAND.1,
                format!("slope = {s:.3}, band [{}, {}]", KL_SLOPE_BAND.0, KL_SLOPE_BAND.1),
            ));
            let bad = report
                .rows
                .iter()
                .filter(|r| r.ok())
                .filter(|r| {
                    let (k, se, h) = (r.get("kl").unwrap(), r.get("kl_se").unwrap(), r.get("h2").unwrap());
                    k < h - KL_SE_MULTIPLE * se - ROW_TOL
                })
                .count();
            out.push(outcome("KL >= H2 - 4 SE on every row", bad == 0, format!("{bad} violating rows")));
            if cfg.solver.restriction.is_some() {
                let r = trend("mean_kl_first_over_last");
                out.push(outcome(
                    "restricted mean KL drops by the required factor",
                    r >= RESTRICTED_KL_FACTOR,
                    format!("first/last = {r:.3}, need >= {RESTRICTED_KL_FACTOR}"),
                ));
            }
        }
        ExperimentKind::ChaosBc => {
            for &t in &cfg.t_list {
                let sel: Vec<&GroupSummary> = groups.iter().copied().filter(|g| g.t == Some(t)).collect();
                let m = means(&sel, "one_minus_bc");
                if t == 0.0 {
                    let worst = m.iter().copied().fold(0.0, f64::max);
                    out.push(outcome("t = 0 reproduces the fit", worst <= ROW_TOL, format!("max mean 1-BC = {worst:.3e}")));
                } else {
                    out.push(outcome(&format!("mean 1-BC strictly decreasing in n at t = {t}"), strictly_decreasing(&m), fmt(&m)));
                }
            }
            let worst = report
                .rows
                .iter()
                .filter(|r| r.ok())
                .map(|r| (r.get("one_minus_bc").unwrap() - 0.5 * r.get("h2").unwrap()).abs())
                .fold(0.0, f64::max);
            out.push(outcome("1-BC = H2/2 on every row", worst <= BC_IDENTITY_TOL, format!("max deviation {worst:.2e}")));
        }
        ExperimentKind::Fluctuation => {
            let ratio: Vec<f64> = groups.iter().map(|g| g.derived.get("ratio").copied().unwrap_or(f64::NAN)).collect();
            let inside = ratio.iter().all(|r| *r >= RATIO_BAND.0 && *r <= RATIO_BAND.1);
            out.push(outcome("variance-to-gradient ratio inside band at every n", inside, fmt(&ratio)));
            if groups.len() >= 4 {
                let tau = trend("kendall_tau_ratio");
                out.push(outcome("no monotone drift of the ratio", tau.abs() <= RATIO_KENDALL_MAX, format!("tau = {tau:.3}")));
            }
            for k in ["spread_n_var_hat", "spread_mean_grad_sq_hat"] {
                let s = trend(k);
                out.push(outcome(&format!("{k} <= {SPREAD_MAX}"), s <= SPREAD_MAX, format!("{s:.3}")));
            }
        }
        ExperimentKind::Moments => {
            for col in ["m1", "m2"] {
                let m = means(&groups, col);
                out.push(outcome(&format!("mean {col} strictly decreasing in n"), strictly_decreasing(&m), fmt(&m)));
            }
            let bad = report
                .rows
                .iter()
                .filter(|r| r.ok())
                .filter(|r| r.get("diff").unwrap() < -r.get("gap").unwrap() - ROW_TOL)
                .count();
            out.push(outcome("fitted log-likelihood dominates f_star up to the gap", bad == 0, format!("{bad} violating rows")));
        }
        ExperimentKind::Polymer => {
            let ns: Vec<usize> = {
                let mut v: Vec<usize> = groups.iter().map(|g| g.n).collect();
                v.dedup();
                v
            };
            let var: Vec<f64> = ns
                .iter()
                .map(|&n| groups.iter().find(|g| g.n == n).and_then(|g| g.derived.get("var_energy_over_n").copied()).unwrap_or(f64::NAN))
                .collect();
            out.push(outcome("Var(E)/n lower at the largest n than at the smallest", var.len() > 1 && var[var.len() - 1] < var[0], fmt(&var)));
            if let (Some(&lo), Some(&hi)) = (
                cfg.t_list.iter().min_by(|a, b| a.total_cmp(b)),
                cfg.t_list.iter().max_by(|a, b| a.total_cmp(b)),
            ) {
                for &n in &ns {
                    let at = |t: f64| groups.iter().find(|g| g.n == n && g.t == Some(t)).and_then(|g| g.columns.get("overlap")).map_or(f64::NAN, |a| a.mean);
                    let (a, b) = (at(lo), at(hi));
                    out.push(outcome(&format!("overlap at t = {hi} below t = {lo}, n = {n}"), b < a, format!("{b:.4} vs {a:.4}")));
                }
            }
        }
        ExperimentKind::Bracketing => {
            for g in &groups {
                let eps = g.eps.unwrap_or(f64::NAN);
                let in_family = g.derived.get("all_in_family") == Some(&1.0);
                let viol = g.derived.get("total_violations").copied().unwrap_or(f64::NAN);
                out.push(outcome(&format!("covering members lie in the family, eps = {eps}"), in_family, String::new()));
                out.push(outcome(&format!("brackets hold on the probe grid, eps = {eps}"), viol == 0.0, format!("{viol} violations")));
                let ratio = g.columns.get("entropy_ratio").map_or(f64::NAN, |a| a.mean);
                out.push(outcome(
                    &format!("log count within D (log 1/eps)^(d+1), eps = {eps}"),
                    ratio <= ENTROPY_D,
                    format!("ratio {ratio:.3}, D = {ENTROPY_D}"),
                ));
            }
        }
    }
    out
}
