//! Comma-separated reports. Every report starts with `#` lines echoing the
//! run configuration, then a column header.

use std::fmt::Write as _;

use posg_core::average::{AcoeResiduals, VanishingDiscountRun};
use posg_core::coupling::{LyapunovReport, ValueDifferenceReport};
use posg_core::rollout::{PayoffEquivalence, SaddleReport};
use posg_core::SplitChainConfig;

use crate::table::real;

fn preamble(kind: &str, config: &str) -> String {
    format!("# posg {}\n# config: {}\n", kind, config)
}

/// One row per discount. `wall_times` adds a seconds column; leave it out
/// when outputs must be reproducible byte for byte.
pub fn gamma_table(
    run: &VanishingDiscountRun,
    residuals: &[AcoeResiduals],
    config: &str,
    wall_times: Option<&[f64]>,
) -> String {
    let mut out = preamble("gamma table", config);
    let coords: Vec<String> = run.grid.coords(run.psi_star).iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "# psi_star_coords: {}", coords.join(" "));
    let _ = writeln!(out, "# gamma_estimate: {}", real(run.gamma_estimate()));
    out.push_str("alpha,value_at_ref,gamma,delta_gamma,sup_relative,max_abs_residual,mean_abs_residual,iterations,vi_residual");
    if wall_times.is_some() {
        out.push_str(",wall_time_s");
    }
    out.push('\n');
    for (k, rec) in run.records.iter().enumerate() {
        let delta = if k == 0 { String::new() } else { real(rec.gamma - run.records[k - 1].gamma) };
        let (max_r, mean_r) = residuals.get(k).map_or((String::new(), String::new()), |r| (real(r.max_abs), real(r.mean_abs)));
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            real(rec.alpha),
            real(rec.value_at_ref),
            real(rec.gamma),
            delta,
            real(rec.sup_relative),
            max_r,
            mean_r,
            rec.iterations,
            real(rec.residual)
        );
        if let Some(t) = wall_times {
            let _ = write!(out, ",{:.3}", t.get(k).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

pub fn saddle(report: &SaddleReport, config: &str) -> String {
    let mut out = preamble("saddle report", config);
    let _ = writeln!(out, "# gamma: {}", real(report.gamma));
    let _ = writeln!(out, "# budget: {}", real(report.budget));
    out.push_str("adversary,side,mean,stderr,bound,pass\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.adversary,
            r.side,
            real(r.mean),
            real(r.std_error),
            real(r.bound),
            if r.pass { "pass" } else { "fail" }
        );
    }
    out
}

pub fn simulation(eq: &PayoffEquivalence, config: &str) -> String {
    let mut out = preamble("simulation", config);
    out.push_str(
        "episodes,horizon,hidden_mean,hidden_stderr,belief_mean,belief_stderr,difference,combined_stderr,first_half_mean,second_half_mean,pass\n",
    );
    let h = &eq.hidden;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        h.episodes,
        h.horizon,
        real(h.mean_avg_payoff),
        real(h.std_error),
        real(eq.belief.mean_avg_payoff),
        real(eq.belief.std_error),
        real(eq.difference),
        real(eq.combined_std_error),
        real(h.first_half_mean),
        real(h.second_half_mean),
        if eq.pass { "pass" } else { "fail" }
    );
    out
}

/// Key/value rows for a coupling run.
pub fn coupling(
    cfg: &SplitChainConfig,
    bound: &ValueDifferenceReport,
    ks_p_value: Option<f64>,
    lyapunov: Option<&LyapunovReport>,
    config: &str,
) -> String {
    let mut out = preamble("coupling report", config);
    out.push_str("quantity,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "{},{}", k, v);
    };
    let e = &bound.estimate;
    let set: Vec<String> = cfg.small_set().iter().map(|x| x.to_string()).collect();
    row("small_set", set.join(" "));
    row("delta", real(cfg.delta()));
    row("observation_split", format!("{:?}", cfg.split()).to_lowercase());
    row("samples", e.n_samples.to_string());
    row("censored", e.censored.to_string());
    row("mean_tau", real(e.mean_tau));
    row("ci_low", real(e.ci_low));
    row("ci_high", real(e.ci_high));
    if let Some(p) = ks_p_value {
        row("ks_geometric_p_value", real(p));
    }
    row("value_difference", real(bound.value_difference));
    row("grid_slack", real(bound.grid_slack));
    row("bound", real(bound.bound));
    row("bound_pass", bound.pass.to_string());
    if let Some(l) = lyapunov {
        row("lyapunov_worst_slack", real(l.worst_slack));
        let (x, u, v) = l.worst_at;
        row("lyapunov_worst_at", format!("x={} u={} v={}", x, u, v));
        row("lyapunov_v_bound", real(l.v_bound));
        row("lyapunov_pass", l.pass().to_string());
    }
    out
}
