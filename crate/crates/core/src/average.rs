//! Average-payoff value by vanishing discount.
//!
//! For an increasing discount schedule the discounted game is solved on the
//! grid, `(1 - alpha) V_alpha(psi*)` is recorded as the estimate of the
//! average value, and the relative values `V_alpha - V_alpha(psi*)` are kept
//! for the average-cost residual diagnostics.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::SimplexGrid;
use crate::matgame;
use crate::model::GameModel;
use crate::par;
use crate::shapley::{self, BeliefDynamics, DiscountedSolution, ShapleyError, ValueTable};

/// `1 - 2^-k` for `k = 1..=7`.
pub fn default_schedule() -> Vec<f64> {
    (1..=7).map(|k| 1.0 - libm::ldexp(1.0, -k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRecord {
    pub alpha: f64,
    /// `V_alpha(psi*)`.
    pub value_at_ref: f64,
    /// `(1 - alpha) V_alpha(psi*)`.
    pub gamma: f64,
    /// `V_alpha - V_alpha(psi*)` on the grid.
    pub relative: ValueTable,
    /// `sup |V_alpha - V_alpha(psi*)|`.
    pub sup_relative: f64,
    pub iterations: usize,
    pub residual: f64,
    pub solution: DiscountedSolution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VanishingDiscountRun {
    pub grid: Arc<SimplexGrid>,
    pub psi_star: usize,
    pub records: Vec<AlphaRecord>,
    pub tol: f64,
}

impl VanishingDiscountRun {
    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    /// Gamma at the largest discount.
    pub fn gamma_estimate(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gamma)
    }

    /// `|gamma_{k+1} - gamma_k|` along the schedule.
    pub fn successive_differences(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| (w[1].gamma - w[0].gamma).abs()).collect()
    }

    pub fn max_sup_relative(&self) -> f64 {
        self.records.iter().fold(0.0f64, |a, r| a.max(r.sup_relative))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AverageError {
    Schedule,
    /// A discount did not converge; records for the earlier discounts are kept.
    NotConverged { alpha: f64, partial: VanishingDiscountRun, source: ShapleyError },
    Shapley(ShapleyError),
}

impl fmt::Display for AverageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AverageError::Schedule => write!(f, "discount schedule must be strictly increasing inside (0, 1)"),
            AverageError::NotConverged { alpha, source, .. } => write!(f, "alpha = {}: {}", alpha, source),
            AverageError::Shapley(e) => write!(f, "{}", e),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AverageError {}

/// Solves the discounted game for every discount in `alphas`. The reference
/// belief is snapped to its nearest grid point.
pub fn run_vanishing_discount(
    model: &GameModel,
    grid: Arc<SimplexGrid>,
    alphas: &[f64],
    psi_star: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<VanishingDiscountRun, AverageError> {
    if alphas.is_empty()
        || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0))
        || alphas.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(AverageError::Schedule);
    }
    if grid.nx() != model.num_states() {
        return Err(AverageError::Shapley(ShapleyError::GridMismatch {
            grid_nx: grid.nx(),
            model_nx: model.num_states(),
        }));
    }
    let dynamics = BeliefDynamics::new(model, grid.clone());
    let star = grid.project(psi_star);
    let mut run = VanishingDiscountRun { grid: grid.clone(), psi_star: star, records: Vec::new(), tol };
    for &alpha in alphas {
        match shapley::value_iterate_with(&dynamics, alpha, tol, max_iter) {
            Ok(solution) => run.records.push(record(alpha, star, solution)),
            Err(source) => {
                return Err(AverageError::NotConverged { alpha, partial: run, source });
            }
        }
    }
    Ok(run)
}

fn record(alpha: f64, star: usize, solution: DiscountedSolution) -> AlphaRecord {
    let value_at_ref = solution.table.values[star];
    let rel: Vec<f64> = solution.table.values.iter().map(|v| v - value_at_ref).collect();
    let sup_relative = rel.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    AlphaRecord {
        alpha,
        value_at_ref,
        gamma: (1.0 - alpha) * value_at_ref,
        relative: ValueTable { grid: solution.table.grid.clone(), values: rel, alpha },
        sup_relative,
        iterations: solution.iterations,
        residual: solution.residual,
        solution,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcoeResiduals {
    /// `val[c~ + E V_rel(psi')] - V_rel(psi) - gamma` per grid point.
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// How far the relative table at schedule point `index` is from satisfying
/// the undiscounted average-cost equation. A diagnostic: it vanishes only in
/// the limit.
pub fn acoe_residuals(model: &GameModel, run: &VanishingDiscountRun, index: usize) -> Result<AcoeResiduals, ShapleyError> {
    let dynamics = BeliefDynamics::new(model, run.grid.clone());
    acoe_residuals_with(&dynamics, run, index)
}

pub fn acoe_residuals_with(
    dynamics: &BeliefDynamics,
    run: &VanishingDiscountRun,
    index: usize,
) -> Result<AcoeResiduals, ShapleyError> {
    let rec = &run.records[index];
    let rel = &rec.relative.values;
    let out = par::map_indices(rel.len(), |i| {
        matgame::solve(&dynamics.stage_matrix(rel, 1.0, i)).map(|s| s.value - rel[i] - rec.gamma)
    });
    let residuals = out.into_iter().collect::<Result<Vec<_>, _>>()?;
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let mean_abs = residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64;
    Ok(AcoeResiduals { residuals, max_abs, mean_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canon2, sep2, unctrl2, UNCTRL2_C, UNCTRL2_P};

    fn grid(m: u32) -> Arc<SimplexGrid> {
        Arc::new(SimplexGrid::build(2, m).unwrap())
    }

    #[test]
    fn schedule() {
        let s = default_schedule();
        assert_eq!(s.len(), 7);
        assert_eq!(s[0], 0.5);
        assert_eq!(s[6], 0.9921875);
    }

    #[test]
    fn separable_cost_gamma_is_stage_value() {
        let m = sep2();
        let run = run_vanishing_discount(&m, grid(16), &default_schedule(), &[0.5, 0.5], 1e-6, 100_000).unwrap();
        for r in &run.records {
            assert!((r.gamma - 1.5).abs() < 1e-4, "alpha {} gamma {}", r.alpha, r.gamma);
            assert!(r.sup_relative < 1e-6);
        }
        for k in 0..run.records.len() {
            let res = acoe_residuals(&m, &run, k).unwrap();
            assert!(res.max_abs <= 2e-6, "{}", res.max_abs);
        }
    }

    #[test]
    fn canon2_gamma_is_zero() {
        let m = canon2();
        let run = run_vanishing_discount(&m, grid(8), &[0.5, 0.75], &[0.3, 0.7], 1e-6, 100_000).unwrap();
        assert!(run.gammas().iter().all(|g| g.abs() < 1e-6));
        assert_eq!(run.successive_differences().len(), 1);
    }

    #[test]
    fn uncontrolled_gamma_tracks_stationary_cost() {
        // pi P = pi for the two-state chain: pi_0 * p01 = pi_1 * p10
        let (p01, p10) = (UNCTRL2_P[0][1], UNCTRL2_P[1][0]);
        let pi0 = p10 / (p01 + p10);
        let avg = pi0 * UNCTRL2_C[0] + (1.0 - pi0) * UNCTRL2_C[1];
        let m = unctrl2();
        let run = run_vanishing_discount(&m, grid(32), &default_schedule(), &[0.5, 0.5], 1e-6, 100_000).unwrap();
        // (1 - alpha) V_alpha(psi) - pi'c = O(1 - alpha); the last point is close
        let last = run.gamma_estimate();
        assert!((last - avg).abs() < 0.05, "{} vs {}", last, avg);
    }

    #[test]
    fn uncontrolled_residual_identity() {
        // for a single action pair r = (1 - a) (E V(psi') - V(psi*)) up to the VI residual
        let m = unctrl2();
        let g = grid(16);
        let tol = 1e-8;
        let run = run_vanishing_discount(&m, g.clone(), &[0.6, 0.9], &[0.5, 0.5], tol, 100_000).unwrap();
        let dynamics = BeliefDynamics::new(&m, g.clone());
        for k in 0..2 {
            let res = acoe_residuals_with(&dynamics, &run, k).unwrap();
            let rec = &run.records[k];
            let v = &rec.solution.table.values;
            for i in 0..g.len() {
                let want = (1.0 - rec.alpha) * (dynamics.expected_next(v, i, 0, 0) - rec.value_at_ref);
                assert!((res.residuals[i] - want).abs() <= 2.0 * tol, "{} vs {}", res.residuals[i], want);
            }
        }
    }

    #[test]
    fn rejects_bad_schedule() {
        let m = canon2();
        assert_eq!(
            run_vanishing_discount(&m, grid(4), &[0.9, 0.5], &[0.5, 0.5], 1e-6, 10),
            Err(AverageError::Schedule)
        );
        assert_eq!(run_vanishing_discount(&m, grid(4), &[1.0], &[0.5, 0.5], 1e-6, 10), Err(AverageError::Schedule));
    }

    #[test]
    fn partial_results_survive_non_convergence() {
        let m = unctrl2();
        match run_vanishing_discount(&m, grid(4), &[0.5, 0.999], &[0.5, 0.5], 1e-10, 200) {
            Err(AverageError::NotConverged { alpha, partial, .. }) => {
                assert_eq!(alpha, 0.999);
                assert_eq!(partial.records.len(), 1);
            }
            other => panic!("unexpected {:?}", other),
        }
    }
}
