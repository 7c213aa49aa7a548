use std::sync::Arc;

use posg_core::average::{acoe_residuals, default_schedule};
use posg_core::coupling::{estimate_coupling_time, SplitChainConfig};
use posg_core::model::{patrol2, unctrl2, UNCTRL2_C, UNCTRL2_P};
use posg_core::{run_vanishing_discount, Belief, Side, SimplexGrid, Strategy};

fn grid(m: u32) -> Arc<SimplexGrid> {
    Arc::new(SimplexGrid::build(2, m).unwrap())
}

#[test]
fn gammas_are_bounded_by_c_max() {
    let m = patrol2();
    let tol = 1e-6;
    let run = run_vanishing_discount(&m, grid(16), &default_schedule(), &[0.5, 0.5], tol, 100_000).unwrap();
    for r in &run.records {
        assert!(r.gamma.abs() <= m.c_max() + tol, "alpha {} gamma {}", r.alpha, r.gamma);
    }
}

#[test]
fn reference_belief_moves_gamma_by_relative_values_only() {
    let m = patrol2();
    let tol = 1e-7;
    let alphas = default_schedule();
    let a = run_vanishing_discount(&m, grid(16), &alphas, &[0.5, 0.5], tol, 100_000).unwrap();
    let b = run_vanishing_discount(&m, grid(16), &alphas, &[0.0, 1.0], tol, 100_000).unwrap();
    let last = alphas.len() - 1;
    let alpha = alphas[last];
    let gap = (a.gamma_estimate() - b.gamma_estimate()).abs();
    let allowed = (1.0 - alpha) * 2.0 * a.records[last].sup_relative + 2.0 * tol;
    assert!(gap <= allowed, "{} > {}", gap, allowed);
}

#[test]
fn relative_values_stay_below_coupling_bound() {
    let m = patrol2();
    let tol = 1e-6;
    let g = grid(16);
    let run = run_vanishing_discount(&m, g.clone(), &default_schedule(), &[0.5, 0.5], tol, 100_000).unwrap();
    let cfg = SplitChainConfig::full(&m).unwrap();
    let star = Belief::new(g.probs(run.psi_star).to_vec()).unwrap();
    let mut t_hat: f64 = 0.0;
    for x in 0..2 {
        let est = estimate_coupling_time(
            &m,
            &cfg,
            &Belief::point_mass(2, x),
            &star,
            &Strategy::uniform(Side::Row),
            &Strategy::uniform(Side::Col),
            4_000,
            1_000_000,
            x as u64,
        )
        .unwrap();
        t_hat = t_hat.max(est.ci_high);
    }
    let bound = 2.0 * m.c_max() * t_hat + 2.0 * tol;
    assert!(run.max_sup_relative() <= bound, "{} > {}", run.max_sup_relative(), bound);
}

#[test]
fn uncontrolled_gamma_approaches_stationary_cost() {
    // pi_0 p01 = pi_1 p10
    let (p01, p10) = (UNCTRL2_P[0][1], UNCTRL2_P[1][0]);
    let pi0 = p10 / (p01 + p10);
    let avg = pi0 * UNCTRL2_C[0] + (1.0 - pi0) * UNCTRL2_C[1];
    let m = unctrl2();
    let run = run_vanishing_discount(&m, grid(64), &default_schedule(), &[0.5, 0.5], 1e-7, 100_000).unwrap();
    let errs: Vec<f64> = run.gammas().iter().map(|g| (g - avg).abs()).collect();
    assert!(errs[errs.len() - 1] < errs[0]);
    assert!(errs[errs.len() - 1] < 0.05, "{:?}", errs);
    let r0 = acoe_residuals(&m, &run, 0).unwrap();
    let r1 = acoe_residuals(&m, &run, run.records.len() - 1).unwrap();
    assert!(r1.max_abs <= r0.max_abs + 2e-7);
}
