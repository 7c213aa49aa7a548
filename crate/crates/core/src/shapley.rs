//! Discounted game on the belief grid: the Shapley operator, value iteration
//! to its fixed point and the stationary saddle-point strategies read off the
//! converged stage games.
//!
//! For a grid belief `psi` the stage game has entries
//!
//! ```text
//! A[u][v] = c~(psi, u, v) + alpha * sum_y P(y | psi, u, v) * V[proj(psi'_y)]
//! ```
//!
//! where `psi'_y` is the filtered belief and `proj` the nearest grid point.
//! Nearest-point evaluation keeps the grid operator an `alpha`-contraction in
//! the sup norm.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::filter::{self, Belief, UNDERFLOW};
use crate::grid::SimplexGrid;
use crate::matgame::{self, GameSolution, MatGameError, MatrixGame, MixedAction};
use crate::model::GameModel;
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub grid: Arc<SimplexGrid>,
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl ValueTable {
    pub fn zeros(grid: Arc<SimplexGrid>, alpha: f64) -> ValueTable {
        let n = grid.len();
        ValueTable { grid, values: vec![0.0; n], alpha }
    }

    /// Value at the grid point nearest to `psi`.
    pub fn at(&self, psi: &[f64]) -> f64 {
        self.values[self.grid.project(psi)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Stationary strategies per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyTable {
    pub grid: Arc<SimplexGrid>,
    pub row: Vec<MixedAction>,
    pub col: Vec<MixedAction>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapleyError {
    MatGame(MatGameError),
    NotConverged { table: ValueTable, iterations: usize, residual: f64 },
    Discount(f64),
    GridMismatch { grid_nx: usize, model_nx: usize },
}

impl From<MatGameError> for ShapleyError {
    fn from(e: MatGameError) -> Self {
        ShapleyError::MatGame(e)
    }
}

impl fmt::Display for ShapleyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapleyError::MatGame(e) => write!(f, "stage game: {}", e),
            ShapleyError::NotConverged { iterations, residual, .. } => {
                write!(f, "value iteration stopped after {} sweeps with residual {:e}", iterations, residual)
            }
            ShapleyError::Discount(a) => write!(f, "discount factor {} is outside [0, 1)", a),
            ShapleyError::GridMismatch { grid_nx, model_nx } => {
                write!(f, "grid is over {} states but the model has {}", grid_nx, model_nx)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ShapleyError {}

fn check_inputs(model: &GameModel, grid: &SimplexGrid, alpha: f64) -> Result<(), ShapleyError> {
    if grid.nx() != model.num_states() {
        return Err(ShapleyError::GridMismatch { grid_nx: grid.nx(), model_nx: model.num_states() });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(ShapleyError::Discount(alpha));
    }
    Ok(())
}

/// Stage game at grid point `i`, computed directly from the filter.
pub fn stage_matrix(model: &GameModel, grid: &SimplexGrid, values: &[f64], alpha: f64, i: usize) -> MatrixGame {
    let psi = grid.point(i);
    let (nu, nv) = (model.num_actions_p1(), model.num_actions_p2());
    let mut entries = vec![0.0; nu * nv];
    for u in 0..nu {
        for v in 0..nv {
            let pred = filter::obs_predictive(model, &psi, u, v);
            let mut cont = 0.0;
            for (y, &py) in pred.iter().enumerate() {
                if py < UNDERFLOW {
                    continue;
                }
                let next = filter::filter_update(model, &psi, u, v, y).expect("observation has positive mass");
                cont += py * values[grid.project(next.probs())];
            }
            entries[u * nv + v] = filter::stage_cost(model, &psi, u, v) + alpha * cont;
        }
    }
    MatrixGame::new(nu, nv, entries).expect("finite stage game")
}

/// Belief transitions of every grid point, precomputed once: stage costs and,
/// per action pair, the observation branches `(P(y), next grid index)`.
#[derive(Clone, Debug)]
pub struct BeliefDynamics {
    grid: Arc<SimplexGrid>,
    nu: usize,
    nv: usize,
    cost: Vec<f64>,
    /// `offsets[k]..offsets[k + 1]` indexes `branches` for pair `k = (i, u, v)`.
    offsets: Vec<usize>,
    branches: Vec<(f64, usize)>,
}

impl BeliefDynamics {
    pub fn new(model: &GameModel, grid: Arc<SimplexGrid>) -> BeliefDynamics {
        let (nu, nv) = (model.num_actions_p1(), model.num_actions_p2());
        let per_point = par::map_indices(grid.len(), |i| {
            let psi = grid.point(i);
            let mut costs = Vec::with_capacity(nu * nv);
            let mut lists = Vec::with_capacity(nu * nv);
            for u in 0..nu {
                for v in 0..nv {
                    costs.push(filter::stage_cost(model, &psi, u, v));
                    let pred = filter::obs_predictive(model, &psi, u, v);
                    let mut list = Vec::new();
                    for (y, &py) in pred.iter().enumerate() {
                        if py < UNDERFLOW {
                            continue;
                        }
                        let next = filter::filter_update(model, &psi, u, v, y).expect("observation has positive mass");
                        list.push((py, grid.project(next.probs())));
                    }
                    lists.push(list);
                }
            }
            (costs, lists)
        });
        let mut cost = Vec::with_capacity(grid.len() * nu * nv);
        let mut offsets = vec![0];
        let mut branches = Vec::new();
        for (costs, lists) in per_point {
            cost.extend(costs);
            for list in lists {
                branches.extend(list);
                offsets.push(branches.len());
            }
        }
        BeliefDynamics { grid, nu, nv, cost, offsets, branches }
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    /// Observation branches of action pair `(u, v)` at grid point `i`.
    pub fn branches(&self, i: usize, u: usize, v: usize) -> &[(f64, usize)] {
        let k = (i * self.nu + u) * self.nv + v;
        &self.branches[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn stage_cost(&self, i: usize, u: usize, v: usize) -> f64 {
        self.cost[(i * self.nu + u) * self.nv + v]
    }

    /// Same matrix as [`stage_matrix`], from the cached transitions, with the
    /// continuation weighted by `weight` (the discount, or one for the
    /// undiscounted residual).
    pub fn stage_matrix(&self, values: &[f64], weight: f64, i: usize) -> MatrixGame {
        let mut entries = vec![0.0; self.nu * self.nv];
        for u in 0..self.nu {
            for v in 0..self.nv {
                let cont: f64 = self.branches(i, u, v).iter().fold(0.0, |acc, &(p, j)| acc + p * values[j]);
                entries[u * self.nv + v] = self.stage_cost(i, u, v) + weight * cont;
            }
        }
        MatrixGame::new(self.nu, self.nv, entries).expect("finite stage game")
    }

    /// Expected continuation `sum_y P(y) V[next]` for a pure action pair.
    pub fn expected_next(&self, values: &[f64], i: usize, u: usize, v: usize) -> f64 {
        self.branches(i, u, v).iter().fold(0.0, |acc, &(p, j)| acc + p * values[j])
    }

    /// One Jacobi sweep of the Shapley operator.
    pub fn apply(&self, values: &[f64], alpha: f64) -> Result<Vec<f64>, ShapleyError> {
        let out = par::map_indices(self.grid.len(), |i| {
            matgame::solve(&self.stage_matrix(values, alpha, i)).map(|s| s.value)
        });
        out.into_iter().collect::<Result<Vec<_>, _>>().map_err(ShapleyError::from)
    }

    /// Solutions of every stage game under `values`.
    pub fn solve_all(&self, values: &[f64], alpha: f64) -> Result<Vec<GameSolution>, ShapleyError> {
        let out = par::map_indices(self.grid.len(), |i| matgame::solve(&self.stage_matrix(values, alpha, i)));
        out.into_iter().collect::<Result<Vec<_>, _>>().map_err(ShapleyError::from)
    }
}

/// The Shapley operator applied once: each new value is the value of the
/// stage game built from `values`.
pub fn apply_operator(model: &GameModel, table: &ValueTable) -> Result<ValueTable, ShapleyError> {
    check_inputs(model, &table.grid, table.alpha)?;
    let dynamics = BeliefDynamics::new(model, table.grid.clone());
    let values = dynamics.apply(&table.values, table.alpha)?;
    Ok(ValueTable { grid: table.grid.clone(), values, alpha: table.alpha })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscountedSolution {
    pub table: ValueTable,
    pub iterations: usize,
    /// `alpha * d / (1 - alpha)` for the last sup-norm change `d`: a bound on
    /// the sup distance to the grid fixed point.
    pub residual: f64,
}

/// Value iteration from zero until `alpha * d / (1 - alpha) <= tol`.
pub fn value_iterate(
    model: &GameModel,
    grid: Arc<SimplexGrid>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DiscountedSolution, ShapleyError> {
    check_inputs(model, &grid, alpha)?;
    let dynamics = BeliefDynamics::new(model, grid);
    value_iterate_with(&dynamics, alpha, tol, max_iter)
}

/// Value iteration on precomputed dynamics.
pub fn value_iterate_with(
    dynamics: &BeliefDynamics,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DiscountedSolution, ShapleyError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(ShapleyError::Discount(alpha));
    }
    let mut values = vec![0.0; dynamics.grid.len()];
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = dynamics.apply(&values, alpha)?;
        let d = next.iter().zip(&values).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        values = next;
        residual = alpha * d / (1.0 - alpha);
        if residual <= tol {
            return Ok(DiscountedSolution {
                table: ValueTable { grid: dynamics.grid.clone(), values, alpha },
                iterations: iter,
                residual,
            });
        }
    }
    Err(ShapleyError::NotConverged {
        table: ValueTable { grid: dynamics.grid.clone(), values, alpha },
        iterations: max_iter,
        residual,
    })
}

/// Optimal mixed actions of the stage games at the converged values.
pub fn extract_strategies(model: &GameModel, table: &ValueTable) -> Result<StrategyTable, ShapleyError> {
    check_inputs(model, &table.grid, table.alpha)?;
    let dynamics = BeliefDynamics::new(model, table.grid.clone());
    extract_strategies_with(&dynamics, table)
}

pub fn extract_strategies_with(dynamics: &BeliefDynamics, table: &ValueTable) -> Result<StrategyTable, ShapleyError> {
    let sols = dynamics.solve_all(&table.values, table.alpha)?;
    let (row, col) = sols.into_iter().map(|s| (s.row_strategy, s.col_strategy)).unzip();
    Ok(StrategyTable { grid: table.grid.clone(), row, col })
}

/// Projects `psi` and reads the stored mixed actions.
impl StrategyTable {
    pub fn row_at(&self, psi: &Belief) -> &MixedAction {
        &self.row[self.grid.project(psi.probs())]
    }

    pub fn col_at(&self, psi: &Belief) -> &MixedAction {
        &self.col[self.grid.project(psi.probs())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canon2, fullobs3, sep2, unctrl2};

    fn grid(nx: usize, m: u32) -> Arc<SimplexGrid> {
        Arc::new(SimplexGrid::build(nx, m).unwrap())
    }

    #[test]
    fn myopic_stage_matrix_is_stage_cost() {
        let m = fullobs3();
        let g = grid(3, 4);
        let values = vec![5.0; g.len()];
        for i in 0..g.len() {
            let a = stage_matrix(&m, &g, &values, 0.0, i);
            let psi = g.point(i);
            for u in 0..2 {
                for v in 0..2 {
                    assert_eq!(a.get(u, v), filter::stage_cost(&m, &psi, u, v));
                }
            }
        }
        let a = stage_matrix(&m, &g, &values, 0.0, g.vertex(1));
        assert_eq!(a.entries(), &[0.0, 1.0, 1.0, -2.0]);
    }

    #[test]
    fn cached_matrix_matches_direct() {
        for m in [canon2(), fullobs3(), unctrl2()] {
            let g = grid(m.num_states(), 6);
            let dynamics = BeliefDynamics::new(&m, g.clone());
            let values: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            for i in 0..g.len() {
                assert_eq!(stage_matrix(&m, &g, &values, 0.9, i), dynamics.stage_matrix(&values, 0.9, i));
            }
        }
    }

    #[test]
    fn uncontrolled_stage_game_is_one_by_one() {
        let m = unctrl2();
        let g = grid(2, 4);
        let a = stage_matrix(&m, &g, &[1.0; 5], 0.5, 2);
        assert_eq!((a.rows(), a.cols()), (1, 1));
        assert_eq!(matgame::solve(&a).unwrap().value, a.get(0, 0));
    }

    #[test]
    fn zero_table_maps_to_stage_values() {
        let m = canon2();
        let t = ValueTable::zeros(grid(2, 8), 0.7);
        let next = apply_operator(&m, &t).unwrap();
        assert!(next.values.iter().all(|v| v.abs() < 1e-12));

        let m = sep2();
        let next = apply_operator(&m, &ValueTable::zeros(grid(2, 8), 0.7)).unwrap();
        assert!(next.values.iter().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn affine_shift() {
        let m = fullobs3();
        let g = grid(3, 5);
        let base: Vec<f64> = (0..g.len()).map(|i| (i as f64).cos() * 3.0).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 2.5).collect();
        let a = apply_operator(&m, &ValueTable { grid: g.clone(), values: base, alpha: 0.8 }).unwrap();
        let b = apply_operator(&m, &ValueTable { grid: g.clone(), values: shifted, alpha: 0.8 }).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - 0.8 * 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn canon2_fixed_point_is_zero() {
        let m = canon2();
        let sol = value_iterate(&m, grid(2, 16), 0.9, 1e-6, 10_000).unwrap();
        assert!(sol.table.values.iter().all(|v| v.abs() < 1e-6));
        let strat = extract_strategies(&m, &sol.table).unwrap();
        for (r, c) in strat.row.iter().zip(&strat.col) {
            assert!((r.probs()[0] - 0.5).abs() < 1e-9 && (c.probs()[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn myopic_discount_converges_in_one_sweep() {
        let m = fullobs3();
        let sol = value_iterate(&m, grid(3, 4), 0.0, 1e-9, 10).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn not_converged_keeps_last_table() {
        let m = fullobs3();
        match value_iterate(&m, grid(3, 4), 0.99, 1e-12, 3) {
            Err(ShapleyError::NotConverged { table, iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
                assert_eq!(table.values.len(), 15);
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn uncontrolled_strategies_are_trivial() {
        let m = unctrl2();
        let sol = value_iterate(&m, grid(2, 8), 0.5, 1e-8, 1000).unwrap();
        let s = extract_strategies(&m, &sol.table).unwrap();
        assert!(s.row.iter().chain(&s.col).all(|a| a.probs() == [1.0]));
    }

    #[test]
    fn bad_inputs() {
        let m = canon2();
        assert!(matches!(value_iterate(&m, grid(3, 2), 0.5, 1e-6, 10), Err(ShapleyError::GridMismatch { .. })));
        assert!(matches!(value_iterate(&m, grid(2, 2), 1.0, 1e-6, 10), Err(ShapleyError::Discount(_))));
    }
}
