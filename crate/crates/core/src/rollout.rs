//! Monte Carlo play on the hidden-state model.
//!
//! Each episode draws the true initial state from the initial belief, lets
//! both players act on the filtered belief only, samples the next state and
//! observation from the kernel at the true state and charges the true stage
//! payoff. Episodes use independent ChaCha streams so results do not depend
//! on how episodes are scheduled.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::filter::{self, Belief, FilterError};
use crate::grid::SimplexGrid;
use crate::matgame::{MixedAction, Side};
use crate::model::GameModel;
use crate::par;
use crate::rng::{path_rng, sample_index};
use crate::shapley::StrategyTable;
use crate::stats::Summary;

/// Belief-based stationary strategies.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategyKind {
    /// Play the stored mixed action of the nearest grid point.
    GridTable { grid: Arc<SimplexGrid>, actions: Arc<Vec<MixedAction>> },
    UniformRandom,
    /// Best pure response, against the stage cost alone, to the mixed action
    /// the opponent strategy announces at the current belief.
    MyopicGreedy { opponent: Box<Strategy> },
    FixedMixed(MixedAction),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub side: Side,
    pub kind: StrategyKind,
}

impl Strategy {
    pub fn uniform(side: Side) -> Strategy {
        Strategy { side, kind: StrategyKind::UniformRandom }
    }

    pub fn fixed(side: Side, action: MixedAction) -> Strategy {
        Strategy { side, kind: StrategyKind::FixedMixed(action) }
    }

    pub fn pure(side: Side, n: usize, a: usize) -> Strategy {
        Strategy::fixed(side, MixedAction::pure(n, a))
    }

    /// One side of a strategy table.
    pub fn from_table(table: &StrategyTable, side: Side) -> Strategy {
        let actions = match side {
            Side::Row => table.row.clone(),
            Side::Col => table.col.clone(),
        };
        Strategy { side, kind: StrategyKind::GridTable { grid: table.grid.clone(), actions: Arc::new(actions) } }
    }

    pub fn myopic_greedy(side: Side, opponent: Strategy) -> Strategy {
        Strategy { side, kind: StrategyKind::MyopicGreedy { opponent: Box::new(opponent) } }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            StrategyKind::GridTable { .. } => "table".into(),
            StrategyKind::UniformRandom => "uniform_random".into(),
            StrategyKind::MyopicGreedy { .. } => "myopic_greedy".into(),
            StrategyKind::FixedMixed(a) => {
                if let Some(i) = a.probs().iter().position(|&p| p == 1.0) {
                    format!("pure_{}", i)
                } else {
                    format!("fixed_mixed{:?}", a.probs())
                }
            }
        }
    }

    fn num_actions(&self, model: &GameModel) -> usize {
        match self.side {
            Side::Row => model.num_actions_p1(),
            Side::Col => model.num_actions_p2(),
        }
    }

    /// Mixed action played at belief `psi`.
    pub fn mixed_action(&self, model: &GameModel, psi: &Belief) -> MixedAction {
        match &self.kind {
            StrategyKind::GridTable { grid, actions } => actions[grid.project(psi.probs())].clone(),
            StrategyKind::UniformRandom => MixedAction::uniform(self.num_actions(model)),
            StrategyKind::FixedMixed(a) => a.clone(),
            StrategyKind::MyopicGreedy { opponent } => {
                MixedAction::pure(self.num_actions(model), self.greedy_action(model, psi, opponent))
            }
        }
    }

    fn greedy_action(&self, model: &GameModel, psi: &Belief, opponent: &Strategy) -> usize {
        let announced = opponent.mixed_action(model, psi);
        let n = self.num_actions(model);
        let mut best = (0, 0.0);
        for a in 0..n {
            let payoff: f64 = announced
                .probs()
                .iter()
                .enumerate()
                .map(|(b, &p)| match self.side {
                    Side::Row => p * filter::stage_cost(model, psi, a, b),
                    Side::Col => p * filter::stage_cost(model, psi, b, a),
                })
                .sum();
            let better = match self.side {
                Side::Row => payoff > best.1,
                Side::Col => payoff < best.1,
            };
            if a == 0 || better {
                best = (a, payoff);
            }
        }
        best.0
    }

    /// Samples an action at belief `psi`.
    pub fn act<R: RngCore + ?Sized>(&self, model: &GameModel, psi: &Belief, rng: &mut R) -> usize {
        match &self.kind {
            StrategyKind::GridTable { grid, actions } => sample_index(actions[grid.project(psi.probs())].probs(), rng),
            StrategyKind::UniformRandom => {
                let n = self.num_actions(model);
                sample_index(&alloc::vec![1.0; n], rng)
            }
            StrategyKind::FixedMixed(a) => sample_index(a.probs(), rng),
            StrategyKind::MyopicGreedy { opponent } => self.greedy_action(model, psi, opponent),
        }
    }

    fn check(&self, model: &GameModel, side: Side) -> Result<(), RolloutError> {
        if self.side != side {
            return Err(RolloutError::WrongSide { strategy: self.name() });
        }
        let n = self.num_actions(model);
        let ok = match &self.kind {
            StrategyKind::GridTable { grid, actions } => {
                grid.nx() == model.num_states() && actions.iter().all(|a| a.len() == n)
            }
            StrategyKind::FixedMixed(a) => a.len() == n,
            StrategyKind::MyopicGreedy { opponent } => {
                let other = match side {
                    Side::Row => Side::Col,
                    Side::Col => Side::Row,
                };
                return opponent.check(model, other);
            }
            StrategyKind::UniformRandom => true,
        };
        if ok {
            Ok(())
        } else {
            Err(RolloutError::Shape { strategy: self.name() })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RolloutError {
    Filter(FilterError),
    WrongSide { strategy: String },
    Shape { strategy: String },
    Empty,
}

impl From<FilterError> for RolloutError {
    fn from(e: FilterError) -> Self {
        RolloutError::Filter(e)
    }
}

impl fmt::Display for RolloutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RolloutError::Filter(e) => write!(f, "belief update failed during simulation: {}", e),
            RolloutError::WrongSide { strategy } => write!(f, "strategy {} is for the other player", strategy),
            RolloutError::Shape { strategy } => write!(f, "strategy {} does not fit the model", strategy),
            RolloutError::Empty => write!(f, "need at least one episode and one step"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RolloutError {}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub episodes: usize,
    pub horizon: usize,
    pub mean_avg_payoff: f64,
    pub std_error: f64,
    pub per_episode_averages: Vec<f64>,
    /// Mean over episodes of the first-half and second-half averages.
    pub first_half_mean: f64,
    pub second_half_mean: f64,
}

#[derive(Clone, Copy, Debug)]
struct EpisodeTotals {
    hidden: f64,
    belief: f64,
    first_half: f64,
    second_half: f64,
}

fn run_episode(
    model: &GameModel,
    s1: &Strategy,
    s2: &Strategy,
    horizon: usize,
    seed: u64,
    episode: u64,
) -> Result<EpisodeTotals, RolloutError> {
    let mut rng = path_rng(seed, episode);
    let mut x = sample_index(model.initial_belief(), &mut rng);
    let mut psi = Belief::initial(model);
    let ny = model.num_obs();
    let half = horizon / 2;
    let (mut hidden, mut belief, mut first) = (0.0, 0.0, 0.0);
    for n in 0..horizon {
        let u = s1.act(model, &psi, &mut rng);
        let v = s2.act(model, &psi, &mut rng);
        hidden += model.cost(x, u, v);
        belief += filter::stage_cost(model, &psi, u, v);
        if n + 1 == half {
            first = hidden;
        }
        let k = sample_index(model.kernel_slice(x, u, v), &mut rng);
        let (z, y) = (k / ny, k % ny);
        psi = filter::filter_update(model, &psi, u, v, y)?;
        x = z;
    }
    let h = horizon as f64;
    let second_len = (horizon - half) as f64;
    Ok(EpisodeTotals {
        hidden: hidden / h,
        belief: belief / h,
        first_half: if half > 0 { first / half as f64 } else { f64::NAN },
        second_half: (hidden - first) / second_len,
    })
}

fn run_all(
    model: &GameModel,
    s1: &Strategy,
    s2: &Strategy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<EpisodeTotals>, RolloutError> {
    if episodes == 0 || horizon == 0 {
        return Err(RolloutError::Empty);
    }
    s1.check(model, Side::Row)?;
    s2.check(model, Side::Col)?;
    par::map_indices(episodes, |e| run_episode(model, s1, s2, horizon, seed, e as u64))
        .into_iter()
        .collect()
}

fn to_result(totals: &[EpisodeTotals], horizon: usize, pick: impl Fn(&EpisodeTotals) -> f64) -> RolloutResult {
    let per: Vec<f64> = totals.iter().map(&pick).collect();
    let s = Summary::of(&per);
    let firsts: Vec<f64> = totals.iter().map(|t| t.first_half).collect();
    let seconds: Vec<f64> = totals.iter().map(|t| t.second_half).collect();
    RolloutResult {
        episodes: totals.len(),
        horizon,
        mean_avg_payoff: s.mean,
        std_error: s.std_error,
        per_episode_averages: per,
        first_half_mean: Summary::of(&firsts).mean,
        second_half_mean: Summary::of(&seconds).mean,
    }
}

/// Average payoff per step over `episodes` independent plays of `horizon`
/// steps. Bit-identical for a given seed whatever the thread count.
pub fn simulate(
    model: &GameModel,
    s1: &Strategy,
    s2: &Strategy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<RolloutResult, RolloutError> {
    let totals = run_all(model, s1, s2, episodes, horizon, seed)?;
    Ok(to_result(&totals, horizon, |t| t.hidden))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffEquivalence {
    /// Averages of the true payoff `c(X_k, U_k, V_k)`.
    pub hidden: RolloutResult,
    /// Averages of the belief payoff `c~(Psi_k, U_k, V_k)` on the same paths.
    pub belief: RolloutResult,
    pub difference: f64,
    pub combined_std_error: f64,
    pub pass: bool,
}

/// Checks that the hidden-state and belief-state payoffs agree in mean within
/// three combined standard errors.
pub fn payoff_equivalence_test(
    model: &GameModel,
    s1: &Strategy,
    s2: &Strategy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<PayoffEquivalence, RolloutError> {
    let totals = run_all(model, s1, s2, episodes, horizon, seed)?;
    let hidden = to_result(&totals, horizon, |t| t.hidden);
    let belief = to_result(&totals, horizon, |t| t.belief);
    let difference = hidden.mean_avg_payoff - belief.mean_avg_payoff;
    let combined_std_error = libm::sqrt(hidden.std_error * hidden.std_error + belief.std_error * belief.std_error);
    let pass = difference.abs() <= 3.0 * combined_std_error + 1e-12;
    Ok(PayoffEquivalence { hidden, belief, difference, combined_std_error, pass })
}

/// Named deviations tried against each half of an optimal table.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryPool {
    /// Player 1 strategies played against the table's player 2 side.
    pub player1: Vec<Strategy>,
    /// Player 2 strategies played against the table's player 1 side.
    pub player2: Vec<Strategy>,
}

/// Uniform play, every pure action, and the myopic best response to the
/// announced table strategy, for both sides.
pub fn default_adversary_pool(model: &GameModel, table: &StrategyTable) -> AdversaryPool {
    let (nu, nv) = (model.num_actions_p1(), model.num_actions_p2());
    let mut player1 = alloc::vec![Strategy::uniform(Side::Row)];
    player1.extend((0..nu).map(|u| Strategy::pure(Side::Row, nu, u)));
    player1.push(Strategy::myopic_greedy(Side::Row, Strategy::from_table(table, Side::Col)));
    let mut player2 = alloc::vec![Strategy::uniform(Side::Col)];
    player2.extend((0..nv).map(|v| Strategy::pure(Side::Col, nv, v)));
    player2.push(Strategy::myopic_greedy(Side::Col, Strategy::from_table(table, Side::Row)));
    AdversaryPool { player1, player2 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleRow {
    pub adversary: String,
    /// Which table side is being challenged: `"p1"` (adversary plays player
    /// 2), `"p2"` (adversary plays player 1) or `"both"` for the table
    /// against itself.
    pub side: &'static str,
    pub mean: f64,
    pub std_error: f64,
    /// Threshold the mean is compared against.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleReport {
    pub gamma: f64,
    pub budget: f64,
    pub rows: Vec<SaddleRow>,
}

impl SaddleReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Plays each table side against every adversary. Player 1's table must
/// guarantee at least `gamma - slack`, player 2's at most `gamma + slack`,
/// and the two together must land within `slack` of `gamma`, where
/// `slack = 3 * stderr + budget`.
#[allow(clippy::too_many_arguments)]
pub fn saddle_test(
    model: &GameModel,
    table: &StrategyTable,
    gamma: f64,
    pool: &AdversaryPool,
    episodes: usize,
    horizon: usize,
    seed: u64,
    budget: f64,
) -> Result<SaddleReport, RolloutError> {
    let star1 = Strategy::from_table(table, Side::Row);
    let star2 = Strategy::from_table(table, Side::Col);
    let mut rows = Vec::new();

    let r = simulate(model, &star1, &star2, episodes, horizon, seed)?;
    let slack = 3.0 * r.std_error + budget;
    rows.push(SaddleRow {
        adversary: "table".into(),
        side: "both",
        mean: r.mean_avg_payoff,
        std_error: r.std_error,
        bound: slack,
        pass: (r.mean_avg_payoff - gamma).abs() <= slack,
    });
    for adv in &pool.player2 {
        let r = simulate(model, &star1, adv, episodes, horizon, seed)?;
        let bound = gamma - (3.0 * r.std_error + budget);
        rows.push(SaddleRow {
            adversary: adv.name(),
            side: "p1",
            mean: r.mean_avg_payoff,
            std_error: r.std_error,
            bound,
            pass: r.mean_avg_payoff >= bound,
        });
    }
    for adv in &pool.player1 {
        let r = simulate(model, adv, &star2, episodes, horizon, seed)?;
        let bound = gamma + 3.0 * r.std_error + budget;
        rows.push(SaddleRow {
            adversary: adv.name(),
            side: "p2",
            mean: r.mean_avg_payoff,
            std_error: r.std_error,
            bound,
            pass: r.mean_avg_payoff <= bound,
        });
    }
    Ok(SaddleReport { gamma, budget, rows })
}
