//! Finite zero-sum matrix games solved exactly by linear programming.
//!
//! The payoff matrix is first mapped affinely onto `[1, 2]`, which keeps every
//! entry positive and makes the result independent of any positive rescaling
//! or shift of the input. The column player's program
//!
//! ```text
//! maximize 1'y  subject to  A y <= 1,  y >= 0
//! ```
//!
//! is solved by a dense tableau simplex with Bland's rule; the row player's
//! strategy is read off the optimal duals.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Pivot cap for the simplex.
pub const MAX_PIVOTS: usize = 10_000;

/// Feasibility / optimality tolerance inside the simplex.
const LP_EPS: f64 = 1e-9;

/// Payoff matrix, row-major. Entry `(u, v)` is what the column player pays
/// the row player.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatGameError {
    Shape { rows: usize, cols: usize, len: usize },
    NonFinite,
    NumericalFailure { pivots: usize },
}

impl fmt::Display for MatGameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatGameError::Shape { rows, cols, len } => {
                write!(f, "matrix of shape {}x{} cannot hold {} entries", rows, cols, len)
            }
            MatGameError::NonFinite => write!(f, "matrix has a non-finite entry"),
            MatGameError::NumericalFailure { pivots } => {
                write!(f, "simplex did not terminate within {} pivots", pivots)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MatGameError {}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<MatrixGame, MatGameError> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(MatGameError::Shape { rows, cols, len: entries.len() });
        }
        if entries.iter().any(|a| !a.is_finite()) {
            return Err(MatGameError::NonFinite);
        }
        Ok(MatrixGame { rows, cols, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<MatrixGame, MatGameError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(MatGameError::Shape { rows: r, cols: c, len: row.len() });
            }
            entries.extend_from_slice(row);
        }
        MatrixGame::new(r, c, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[u * self.cols + v]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The game with the players swapped: `-A^T`.
    pub fn swap_players(&self) -> MatrixGame {
        let mut entries = vec![0.0; self.entries.len()];
        for u in 0..self.rows {
            for v in 0..self.cols {
                entries[v * self.rows + u] = -self.get(u, v);
            }
        }
        MatrixGame { rows: self.cols, cols: self.rows, entries }
    }

    /// `A nu`: the row player's payoff for each pure row.
    pub fn row_payoffs(&self, col: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|u| (0..self.cols).map(|v| self.get(u, v) * col[v]).sum()).collect()
    }

    /// `mu' A`: the payoff of each pure column.
    pub fn col_payoffs(&self, row: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|v| (0..self.rows).map(|u| row[u] * self.get(u, v)).sum()).collect()
    }

    /// Bilinear payoff `mu' A nu`.
    pub fn payoff(&self, row: &[f64], col: &[f64]) -> f64 {
        self.row_payoffs(col).iter().zip(row).map(|(a, p)| a * p).sum()
    }
}

/// A probability vector over one player's actions.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedAction {
    probs: Vec<f64>,
}

impl MixedAction {
    /// Accepts vectors that are nonnegative and sum to one within 1e-9.
    pub fn new(probs: Vec<f64>) -> Option<MixedAction> {
        let s: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return None;
        }
        Some(MixedAction { probs })
    }

    pub fn pure(n: usize, a: usize) -> MixedAction {
        let mut probs = vec![0.0; n];
        probs[a] = 1.0;
        MixedAction { probs }
    }

    pub fn uniform(n: usize) -> MixedAction {
        MixedAction { probs: vec![1.0 / n as f64; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Clamps tiny negative round-off and rescales to sum one.
    fn cleaned(mut probs: Vec<f64>) -> MixedAction {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = probs.iter().sum();
        if s > 0.0 {
            for p in probs.iter_mut() {
                *p /= s;
            }
        } else {
            let n = probs.len();
            return MixedAction::uniform(n);
        }
        MixedAction { probs }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Player 1, the maximizer.
    Row,
    /// Player 2, the minimizer.
    Col,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameSolution {
    pub value: f64,
    /// Maximizer's optimal mixed action.
    pub row_strategy: MixedAction,
    /// Minimizer's optimal mixed action.
    pub col_strategy: MixedAction,
}

/// Value and one optimal strategy pair of a matrix game. Deterministic for a
/// given matrix; the strategies returned depend on the final simplex basis.
pub fn solve(game: &MatrixGame) -> Result<GameSolution, MatGameError> {
    let (m, n) = (game.rows, game.cols);
    if m == 1 || n == 1 {
        return Ok(solve_degenerate(game));
    }

    let lo = game.entries.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = game.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let scaled: Vec<f64> = game.entries.iter().map(|a| (a - lo) / range + 1.0).collect();

    let (y, duals) = simplex_max_ones(&scaled, m, n)?;
    let sum_y: f64 = y.iter().sum();
    let sum_x: f64 = duals.iter().sum();
    let col_strategy = MixedAction::cleaned(y);
    let row_strategy = MixedAction::cleaned(duals);
    let scaled_value = 2.0 / (sum_y + sum_x);
    Ok(GameSolution { value: (scaled_value - 1.0) * range + lo, row_strategy, col_strategy })
}

/// One player has a single action, so the other just optimizes.
fn solve_degenerate(game: &MatrixGame) -> GameSolution {
    if game.rows == 1 {
        let (v, j) = argmin(&game.entries);
        GameSolution {
            value: v,
            row_strategy: MixedAction::pure(1, 0),
            col_strategy: MixedAction::pure(game.cols, j),
        }
    } else {
        let (v, i) = argmax(&game.entries);
        GameSolution {
            value: v,
            row_strategy: MixedAction::pure(game.rows, i),
            col_strategy: MixedAction::pure(1, 0),
        }
    }
}

fn argmax(xs: &[f64]) -> (f64, usize) {
    let mut best = (xs[0], 0);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.0 {
            best = (x, i);
        }
    }
    best
}

fn argmin(xs: &[f64]) -> (f64, usize) {
    let mut best = (xs[0], 0);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < best.0 {
            best = (x, i);
        }
    }
    best
}

/// Solves `max 1'y s.t. A y <= 1, y >= 0` for a strictly positive `m x n`
/// matrix. Returns the primal `y` and the optimal duals.
fn simplex_max_ones(a: &[f64], m: usize, n: usize) -> Result<(Vec<f64>, Vec<f64>), MatGameError> {
    // columns: n structural, m slack, then the right-hand side
    let width = n + m + 1;
    let rhs = n + m;
    let mut tab = vec![0.0; m * width];
    for i in 0..m {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..n].copy_from_slice(&a[i * n..(i + 1) * n]);
        row[n + i] = 1.0;
        row[rhs] = 1.0;
    }
    // reduced costs c_j - z_j
    let mut reduced = vec![0.0; n + m];
    reduced[..n].iter_mut().for_each(|r| *r = 1.0);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    loop {
        // Bland: lowest-index improving column
        let Some(enter) = (0..n + m).find(|&j| reduced[j] > LP_EPS) else {
            break;
        };
        if pivots >= MAX_PIVOTS {
            return Err(MatGameError::NumericalFailure { pivots });
        }
        // ratio test, ties to the lowest basic variable index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab[i * width + enter];
            if aij > LP_EPS {
                let ratio = tab[i * width + rhs] / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - LP_EPS || (ratio <= best + LP_EPS && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        // A > 0 keeps the program bounded
        let Some((r, _)) = leave else {
            return Err(MatGameError::NumericalFailure { pivots });
        };

        let piv = tab[r * width + enter];
        for k in 0..width {
            tab[r * width + k] /= piv;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = tab[i * width + enter];
            if f != 0.0 {
                for k in 0..width {
                    tab[i * width + k] -= f * tab[r * width + k];
                }
            }
        }
        let f = reduced[enter];
        for k in 0..n + m {
            reduced[k] -= f * tab[r * width + k];
        }
        basis[r] = enter;
        pivots += 1;
    }

    let mut y = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tab[i * width + rhs];
        }
    }
    let duals: Vec<f64> = (0..m).map(|i| -reduced[n + i]).collect();
    Ok((y, duals))
}

/// Best pure response to a fixed opponent mixed action. For `Side::Row` the
/// row player maximizes `A nu`; for `Side::Col` the column player minimizes
/// `mu' A`. Ties go to the lowest index.
pub fn best_response_value(game: &MatrixGame, opponent: &MixedAction, side: Side) -> (f64, usize) {
    match side {
        Side::Row => argmax(&game.row_payoffs(opponent.probs())),
        Side::Col => argmin(&game.col_payoffs(opponent.probs())),
    }
}

/// Largest violation of the two saddle inequalities by `sol` (zero when both
/// hold exactly).
pub fn saddle_gap(game: &MatrixGame, sol: &GameSolution) -> f64 {
    let (floor, _) = best_response_value(game, &sol.row_strategy, Side::Col);
    let (ceil, _) = best_response_value(game, &sol.col_strategy, Side::Row);
    (sol.value - floor).max(ceil - sol.value).max(0.0)
}
