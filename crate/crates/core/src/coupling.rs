//! Coupled pair chain, minorization constant and split chain with a
//! pseudo-atom.
//!
//! Two copies of the hidden chain, started from different beliefs, are driven
//! by one shared action process: player 1 acts on the first copy's filtered
//! belief, player 2 on the second's. On the small set `K x K` the pair kernel
//! dominates `delta` times the uniform law on `K x K`, where
//!
//! ```text
//! delta = 1/2 * (min_{x in K, u, v, z in K} p(z | x, u, v) * |K|)^2
//! ```
//!
//! Each arrival in `K x K` is assigned level 1 with probability `delta`. From
//! a level-1 state the next pair is uniform on `K x K` whatever the current
//! pair, so `K x K x {1}` is an atom and its hitting time is the coupling time.
//! From a level-0 state in `K x K` the next pair follows the residual kernel
//! `(p_pair - delta * uniform) / (1 - delta)`; elsewhere the plain pair kernel.
//!
//! Observations are split in one of two ways. [`ObservationSplit::Product`]
//! uses the uniform law on observation pairs inside the atom, which needs the
//! joint residual over (pair, observations) to be nonnegative.
//! [`ObservationSplit::Conditional`] only splits the state pair and draws each
//! observation from `p(y | x, z, u, v)` afterwards. Both leave the law of the
//! pair process, observations included, unchanged once the level bit is
//! dropped.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::filter::{self, Belief, FilterError};
use crate::model::{GameModel, LyapunovCert};
use crate::par;
use crate::rng::{bernoulli, path_rng, sample_index};
use crate::rollout::{RolloutError, Strategy};
use crate::shapley::{DiscountedSolution, StrategyTable};
use crate::stats::{Summary, Z95};
use crate::matgame::Side;

/// Default cap on simulated coupling times.
pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;

const RESIDUAL_EPS: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingError {
    /// Some `p(z | x, u, v)` with `x, z` in `K` is zero.
    NoMinorization { x: usize, u: usize, v: usize, z: usize },
    InvalidSmallSet,
    /// The residual kernel would put negative mass somewhere.
    InvalidResidual { worst: f64 },
    AllCensored { n_samples: usize, horizon_cap: u64 },
    Filter(FilterError),
    Rollout(RolloutError),
}

impl From<FilterError> for CouplingError {
    fn from(e: FilterError) -> Self {
        CouplingError::Filter(e)
    }
}

impl From<RolloutError> for CouplingError {
    fn from(e: RolloutError) -> Self {
        CouplingError::Rollout(e)
    }
}

impl fmt::Display for CouplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingError::NoMinorization { x, u, v, z } => write!(
                f,
                "no minorization on K: p(z={} | x={}, u={}, v={}) = 0",
                z, x, u, v
            ),
            CouplingError::InvalidSmallSet => write!(f, "small set must be a nonempty set of valid states"),
            CouplingError::InvalidResidual { worst } => {
                write!(f, "residual kernel has negative mass {:e}", worst)
            }
            CouplingError::AllCensored { n_samples, horizon_cap } => {
                write!(f, "all {} coupling runs exceeded the horizon cap {}", n_samples, horizon_cap)
            }
            CouplingError::Filter(e) => write!(f, "{}", e),
            CouplingError::Rollout(e) => write!(f, "{}", e),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CouplingError {}

fn normalize_small_set(model: &GameModel, k: &[usize]) -> Result<Vec<usize>, CouplingError> {
    let mut set: Vec<usize> = k.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.is_empty() || set.iter().any(|&x| x >= model.num_states()) {
        return Err(CouplingError::InvalidSmallSet);
    }
    Ok(set)
}

/// The minorization constant of the pair chain on `K x K`.
pub fn compute_delta(model: &GameModel, small_set: &[usize]) -> Result<f64, CouplingError> {
    let set = normalize_small_set(model, small_set)?;
    let mut min = f64::INFINITY;
    for &x in &set {
        for u in 0..model.num_actions_p1() {
            for v in 0..model.num_actions_p2() {
                let row = model.marginal(x, u, v);
                for &z in &set {
                    if row[z] <= 0.0 {
                        return Err(CouplingError::NoMinorization { x, u, v, z });
                    }
                    min = min.min(row[z]);
                }
            }
        }
    }
    let scaled = min * set.len() as f64;
    Ok(0.5 * scaled * scaled)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationSplit {
    /// Observation pair uniform inside the atom.
    Product,
    /// Observations drawn given the state transition in every branch.
    Conditional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitChainConfig {
    small_set: Vec<usize>,
    in_set: Vec<bool>,
    delta: f64,
    split: ObservationSplit,
}

impl SplitChainConfig {
    /// Uses [`ObservationSplit::Product`] when its residual is nonnegative and
    /// falls back to [`ObservationSplit::Conditional`] otherwise.
    pub fn new(model: &GameModel, small_set: &[usize]) -> Result<SplitChainConfig, CouplingError> {
        let mut cfg = SplitChainConfig::build(model, small_set, ObservationSplit::Conditional)?;
        if product_residual_min(model, &cfg) >= -RESIDUAL_EPS {
            cfg.split = ObservationSplit::Product;
        }
        Ok(cfg)
    }

    pub fn with_split(
        model: &GameModel,
        small_set: &[usize],
        split: ObservationSplit,
    ) -> Result<SplitChainConfig, CouplingError> {
        let cfg = SplitChainConfig::build(model, small_set, split)?;
        if split == ObservationSplit::Product {
            let worst = product_residual_min(model, &cfg);
            if worst < -RESIDUAL_EPS {
                return Err(CouplingError::InvalidResidual { worst });
            }
        }
        Ok(cfg)
    }

    /// The whole state space as the small set.
    pub fn full(model: &GameModel) -> Result<SplitChainConfig, CouplingError> {
        let all: Vec<usize> = (0..model.num_states()).collect();
        SplitChainConfig::new(model, &all)
    }

    fn build(model: &GameModel, small_set: &[usize], split: ObservationSplit) -> Result<SplitChainConfig, CouplingError> {
        let set = normalize_small_set(model, small_set)?;
        let delta = compute_delta(model, &set)?;
        let mut in_set = vec![false; model.num_states()];
        for &x in &set {
            in_set[x] = true;
        }
        let cfg = SplitChainConfig { small_set: set, in_set, delta, split };
        let worst = state_residual_min(model, &cfg);
        if worst < -RESIDUAL_EPS {
            return Err(CouplingError::InvalidResidual { worst });
        }
        Ok(cfg)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn small_set(&self) -> &[usize] {
        &self.small_set
    }

    pub fn split(&self) -> ObservationSplit {
        self.split
    }

    pub fn in_pair_set(&self, a: usize, b: usize) -> bool {
        self.in_set[a] && self.in_set[b]
    }

    /// Mass the minorizing measure puts on one pair of `K x K`.
    fn atom_mass(&self) -> f64 {
        let k = self.small_set.len() as f64;
        self.delta / (k * k)
    }
}

/// Smallest entry of `p(z1|x1) p(z2|x2) - delta * Theta(z1, z2)` over pairs
/// `x` in `K x K`.
fn state_residual_min(model: &GameModel, cfg: &SplitChainConfig) -> f64 {
    let mut worst = f64::INFINITY;
    let atom = cfg.atom_mass();
    for &x1 in &cfg.small_set {
        for &x2 in &cfg.small_set {
            for u in 0..model.num_actions_p1() {
                for v in 0..model.num_actions_p2() {
                    let (r1, r2) = (model.marginal(x1, u, v), model.marginal(x2, u, v));
                    for &z1 in &cfg.small_set {
                        for &z2 in &cfg.small_set {
                            worst = worst.min(r1[z1] * r2[z2] - atom);
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Same, jointly with observations and the uniform observation-pair law.
fn product_residual_min(model: &GameModel, cfg: &SplitChainConfig) -> f64 {
    let ny = model.num_obs();
    let atom = cfg.atom_mass() / (ny * ny) as f64;
    let mut worst = f64::INFINITY;
    for &x1 in &cfg.small_set {
        for &x2 in &cfg.small_set {
            for u in 0..model.num_actions_p1() {
                for v in 0..model.num_actions_p2() {
                    let (s1, s2) = (model.kernel_slice(x1, u, v), model.kernel_slice(x2, u, v));
                    for &z1 in &cfg.small_set {
                        for &z2 in &cfg.small_set {
                            for y1 in 0..ny {
                                for y2 in 0..ny {
                                    worst = worst.min(s1[z1 * ny + y1] * s2[z2 * ny + y2] - atom);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    worst
}

/// State of the split chain: the pair, its level bit, the last observations
/// and each copy's filtered belief.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitChainState {
    pub x_hat: usize,
    pub x_tilde: usize,
    pub level: bool,
    pub y_hat: Option<usize>,
    pub y_tilde: Option<usize>,
    pub psi_hat: Belief,
    pub psi_tilde: Belief,
}

impl SplitChainState {
    /// Draws the initial pair from `psi_hat x psi_tilde` and splits it.
    pub fn initial<R: RngCore + ?Sized>(
        cfg: &SplitChainConfig,
        psi_hat: &Belief,
        psi_tilde: &Belief,
        rng: &mut R,
    ) -> SplitChainState {
        let x_hat = sample_index(psi_hat.probs(), rng);
        let x_tilde = sample_index(psi_tilde.probs(), rng);
        let level = cfg.in_pair_set(x_hat, x_tilde) && bernoulli(rng, cfg.delta);
        SplitChainState {
            x_hat,
            x_tilde,
            level,
            y_hat: None,
            y_tilde: None,
            psi_hat: psi_hat.clone(),
            psi_tilde: psi_tilde.clone(),
        }
    }

    pub fn in_atom(&self) -> bool {
        self.level
    }
}

/// Draws `y` from `p(z, . | x, u, v) / p(z | x, u, v)`.
fn conditional_obs<R: RngCore + ?Sized>(model: &GameModel, x: usize, u: usize, v: usize, z: usize, rng: &mut R) -> usize {
    let ny = model.num_obs();
    sample_index(&model.kernel_slice(x, u, v)[z * ny..(z + 1) * ny], rng)
}

/// One transition of the split chain under the shared actions `(u, v)`.
pub fn step_split_chain<R: RngCore + ?Sized>(
    model: &GameModel,
    cfg: &SplitChainConfig,
    state: &SplitChainState,
    u: usize,
    v: usize,
    rng: &mut R,
) -> Result<SplitChainState, CouplingError> {
    let (nx, ny) = (model.num_states(), model.num_obs());
    let (x1, x2) = (state.x_hat, state.x_tilde);
    debug_assert!(!state.level || cfg.in_pair_set(x1, x2));
    let k = cfg.small_set.len();

    let (z1, y1, z2, y2) = if state.level {
        let z1 = cfg.small_set[sample_index(&vec![1.0; k], rng)];
        let z2 = cfg.small_set[sample_index(&vec![1.0; k], rng)];
        match cfg.split {
            ObservationSplit::Product => {
                let y1 = sample_index(&vec![1.0; ny], rng);
                let y2 = sample_index(&vec![1.0; ny], rng);
                (z1, y1, z2, y2)
            }
            ObservationSplit::Conditional => {
                let y1 = conditional_obs(model, x1, u, v, z1, rng);
                let y2 = conditional_obs(model, x2, u, v, z2, rng);
                (z1, y1, z2, y2)
            }
        }
    } else if cfg.in_pair_set(x1, x2) {
        let (s1, s2) = (model.kernel_slice(x1, u, v), model.kernel_slice(x2, u, v));
        match cfg.split {
            ObservationSplit::Product => {
                let atom = cfg.atom_mass() / (ny * ny) as f64;
                let cells = nx * ny;
                let mut w = vec![0.0; cells * cells];
                for a in 0..cells {
                    for b in 0..cells {
                        let mut m = s1[a] * s2[b];
                        if cfg.in_pair_set(a / ny, b / ny) {
                            m -= atom;
                        }
                        w[a * cells + b] = m.max(0.0);
                    }
                }
                let idx = sample_index(&w, rng);
                let (a, b) = (idx / cells, idx % cells);
                (a / ny, a % ny, b / ny, b % ny)
            }
            ObservationSplit::Conditional => {
                let atom = cfg.atom_mass();
                let (r1, r2) = (model.marginal(x1, u, v), model.marginal(x2, u, v));
                let mut w = vec![0.0; nx * nx];
                for a in 0..nx {
                    for b in 0..nx {
                        let mut m = r1[a] * r2[b];
                        if cfg.in_pair_set(a, b) {
                            m -= atom;
                        }
                        w[a * nx + b] = m.max(0.0);
                    }
                }
                let idx = sample_index(&w, rng);
                let (z1, z2) = (idx / nx, idx % nx);
                let y1 = conditional_obs(model, x1, u, v, z1, rng);
                let y2 = conditional_obs(model, x2, u, v, z2, rng);
                (z1, y1, z2, y2)
            }
        }
    } else {
        let a = sample_index(model.kernel_slice(x1, u, v), rng);
        let b = sample_index(model.kernel_slice(x2, u, v), rng);
        (a / ny, a % ny, b / ny, b % ny)
    };

    let level = cfg.in_pair_set(z1, z2) && bernoulli(rng, cfg.delta);
    let psi_hat = filter::filter_update(model, &state.psi_hat, u, v, y1)?;
    let psi_tilde = filter::filter_update(model, &state.psi_tilde, u, v, y2)?;
    Ok(SplitChainState {
        x_hat: z1,
        x_tilde: z2,
        level,
        y_hat: Some(y1),
        y_tilde: Some(y2),
        psi_hat,
        psi_tilde,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingEstimate {
    pub delta: f64,
    pub n_samples: usize,
    /// Hitting times of the atom; `None` for censored runs.
    pub taus: Vec<Option<u64>>,
    pub mean_tau: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored: usize,
}

impl CouplingEstimate {
    pub fn uncensored(&self) -> Vec<u64> {
        self.taus.iter().flatten().copied().collect()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Runs one coupled path until the atom is hit or `horizon_cap` steps pass.
#[allow(clippy::too_many_arguments)]
fn coupling_path(
    model: &GameModel,
    cfg: &SplitChainConfig,
    psi_hat: &Belief,
    psi_tilde: &Belief,
    s1: &Strategy,
    s2: &Strategy,
    horizon_cap: u64,
    seed: u64,
    path: u64,
) -> Result<Option<u64>, CouplingError> {
    let mut rng = path_rng(seed, path);
    let mut state = SplitChainState::initial(cfg, psi_hat, psi_tilde, &mut rng);
    if state.level {
        return Ok(Some(0));
    }
    for n in 1..=horizon_cap {
        let u = s1.act(model, &state.psi_hat, &mut rng);
        let v = s2.act(model, &state.psi_tilde, &mut rng);
        state = step_split_chain(model, cfg, &state, u, v, &mut rng)?;
        if state.level {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Monte Carlo estimate of the mean hitting time of the atom. Player 1 acts
/// on the first copy's belief, player 2 on the second's.
#[allow(clippy::too_many_arguments)]
pub fn estimate_coupling_time(
    model: &GameModel,
    cfg: &SplitChainConfig,
    psi_hat: &Belief,
    psi_tilde: &Belief,
    s1: &Strategy,
    s2: &Strategy,
    n_samples: usize,
    horizon_cap: u64,
    seed: u64,
) -> Result<CouplingEstimate, CouplingError> {
    if s1.side != Side::Row || s2.side != Side::Col {
        return Err(CouplingError::Rollout(RolloutError::WrongSide { strategy: s1.name() }));
    }
    let taus = par::map_indices(n_samples, |p| {
        coupling_path(model, cfg, psi_hat, psi_tilde, s1, s2, horizon_cap, seed, p as u64)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let hits: Vec<f64> = taus.iter().flatten().map(|&t| t as f64).collect();
    if hits.is_empty() {
        return Err(CouplingError::AllCensored { n_samples, horizon_cap });
    }
    let s = Summary::of(&hits);
    let half = Z95 * s.std_error;
    Ok(CouplingEstimate {
        delta: cfg.delta,
        n_samples,
        censored: taus.len() - hits.len(),
        taus,
        mean_tau: s.mean,
        ci_low: s.mean - half,
        ci_high: s.mean + half,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueDifferenceReport {
    pub estimate: CouplingEstimate,
    /// `|V(psi_hat) - V(psi_tilde)|` read from the grid table.
    pub value_difference: f64,
    /// `2 * residual + c_max / (1 - alpha) * (projection distances)`.
    pub grid_slack: f64,
    /// `2 c_max (mean tau + CI half width) + grid_slack`.
    pub bound: f64,
    pub pass: bool,
}

/// Compares the discounted value gap between two beliefs with twice the
/// payoff bound times the expected coupling time. The coupled copies are
/// driven by the table's stationary strategies.
#[allow(clippy::too_many_arguments)]
pub fn check_value_difference_bound(
    model: &GameModel,
    solution: &DiscountedSolution,
    strategies: &StrategyTable,
    psi_hat: &Belief,
    psi_tilde: &Belief,
    cfg: &SplitChainConfig,
    n_samples: usize,
    horizon_cap: u64,
    seed: u64,
) -> Result<ValueDifferenceReport, CouplingError> {
    let table = &solution.table;
    let value_difference = (table.at(psi_hat.probs()) - table.at(psi_tilde.probs())).abs();
    let s1 = Strategy::from_table(strategies, Side::Row);
    let s2 = Strategy::from_table(strategies, Side::Col);
    let estimate = estimate_coupling_time(model, cfg, psi_hat, psi_tilde, &s1, &s2, n_samples, horizon_cap, seed)?;
    let projection = table.grid.projection_distance(psi_hat.probs()) + table.grid.projection_distance(psi_tilde.probs());
    let grid_slack = 2.0 * solution.residual + model.c_max() / (1.0 - table.alpha) * projection;
    let bound = 2.0 * model.c_max() * (estimate.mean_tau + estimate.half_width()) + grid_slack;
    Ok(ValueDifferenceReport { pass: value_difference <= bound, estimate, value_difference, grid_slack, bound })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovReport {
    /// Largest `E[V(X')] - V(x) - (-h(x) + c 1{x in K})` over `(x, u, v)`.
    pub worst_slack: f64,
    pub worst_at: (usize, usize, usize),
    /// Every `(x, u, v, slack)` with positive slack beyond tolerance.
    pub failures: Vec<(usize, usize, usize, f64)>,
    /// `max |V|`; `E[V(X_n)] / n <= max|V| / n`, so the growth condition
    /// holds automatically on a finite state space.
    pub v_bound: f64,
}

impl LyapunovReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the drift inequality for every state and pure action pair. Mixed
/// actions average the pure cases, so this covers every strategy.
pub fn validate_lyapunov(model: &GameModel, cert: &LyapunovCert) -> LyapunovReport {
    let mut in_k = vec![false; model.num_states()];
    for &k in &cert.small_set {
        if k < in_k.len() {
            in_k[k] = true;
        }
    }
    let mut worst = (f64::NEG_INFINITY, (0, 0, 0));
    let mut failures = Vec::new();
    for x in 0..model.num_states() {
        for u in 0..model.num_actions_p1() {
            for v in 0..model.num_actions_p2() {
                // summing p(z) (V(z) - V(x)) keeps constant certificates exact
                let drift: f64 = model.marginal(x, u, v).iter().zip(&cert.v).map(|(p, val)| p * (val - cert.v[x])).sum();
                let allowance = -cert.h[x] + if in_k[x] { cert.drift_c } else { 0.0 };
                let slack = drift - allowance;
                if slack > worst.0 {
                    worst = (slack, (x, u, v));
                }
                if slack > 1e-9 {
                    failures.push((x, u, v, slack));
                }
            }
        }
    }
    let v_bound = cert.v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    LyapunovReport { worst_slack: worst.0, worst_at: worst.1, failures, v_bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canon2, fullobs3, point1, unctrl2};

    #[test]
    fn canon2_delta() {
        let m = canon2();
        let d = compute_delta(&m, &[0, 1]).unwrap();
        assert!((d - 0.08).abs() < 1e-15);
    }

    #[test]
    fn single_state_delta() {
        assert_eq!(compute_delta(&point1(), &[0]).unwrap(), 0.5);
    }

    #[test]
    fn sparse_model_has_no_minorization() {
        let m = fullobs3();
        assert!(matches!(compute_delta(&m, &[0, 1, 2]), Err(CouplingError::NoMinorization { .. })));
        assert!(matches!(SplitChainConfig::full(&m), Err(CouplingError::NoMinorization { .. })));
    }

    #[test]
    fn bad_small_sets() {
        let m = canon2();
        assert_eq!(compute_delta(&m, &[]), Err(CouplingError::InvalidSmallSet));
        assert_eq!(compute_delta(&m, &[5]), Err(CouplingError::InvalidSmallSet));
    }

    #[test]
    fn observation_split_choice() {
        // CANON2 has joint masses as small as 0.02 * 0.02, below delta / 16
        let m = canon2();
        assert_eq!(SplitChainConfig::full(&m).unwrap().split(), ObservationSplit::Conditional);
        assert!(matches!(
            SplitChainConfig::with_split(&m, &[0, 1], ObservationSplit::Product),
            Err(CouplingError::InvalidResidual { .. })
        ));
        assert_eq!(SplitChainConfig::full(&point1()).unwrap().split(), ObservationSplit::Product);
    }

    #[test]
    fn atom_step_ignores_current_pair() {
        let m = unctrl2();
        for split in [ObservationSplit::Product, ObservationSplit::Conditional] {
            let cfg = match SplitChainConfig::with_split(&m, &[0, 1], split) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let psi = Belief::uniform(2);
            let mk = |a, b| SplitChainState {
                x_hat: a,
                x_tilde: b,
                level: true,
                y_hat: None,
                y_tilde: None,
                psi_hat: psi.clone(),
                psi_tilde: psi.clone(),
            };
            for seed in 0..50 {
                let a = step_split_chain(&m, &cfg, &mk(0, 1), 0, 0, &mut path_rng(seed, 0)).unwrap();
                let b = step_split_chain(&m, &cfg, &mk(1, 0), 0, 0, &mut path_rng(seed, 0)).unwrap();
                assert_eq!((a.x_hat, a.x_tilde, a.level), (b.x_hat, b.x_tilde, b.level));
                if split == ObservationSplit::Product {
                    assert_eq!((a.y_hat, a.y_tilde), (b.y_hat, b.y_tilde));
                }
            }
        }
    }

    #[test]
    fn level_one_only_inside_small_set() {
        let m = canon2();
        let cfg = SplitChainConfig::new(&m, &[0]).unwrap();
        let mut rng = path_rng(5, 0);
        let mut s = SplitChainState::initial(&cfg, &Belief::uniform(2), &Belief::uniform(2), &mut rng);
        for _ in 0..5000 {
            s = step_split_chain(&m, &cfg, &s, 0, 1, &mut rng).unwrap();
            if s.level {
                assert!(s.x_hat == 0 && s.x_tilde == 0);
            }
        }
    }

    #[test]
    fn single_state_coupling_time() {
        let m = point1();
        let cfg = SplitChainConfig::full(&m).unwrap();
        let psi = Belief::uniform(1);
        let s1 = Strategy::uniform(Side::Row);
        let s2 = Strategy::uniform(Side::Col);
        let est = estimate_coupling_time(&m, &cfg, &psi, &psi, &s1, &s2, 20_000, 1000, 9).unwrap();
        assert!(est.ci_low <= 1.0 && 1.0 <= est.ci_high, "{:?}", (est.mean_tau, est.ci_low, est.ci_high));
        assert_eq!(est.censored, 0);
    }

    #[test]
    fn zero_cap_censors_unless_initially_split() {
        let m = canon2();
        let cfg = SplitChainConfig::full(&m).unwrap();
        let psi = Belief::uniform(2);
        let s1 = Strategy::uniform(Side::Row);
        let s2 = Strategy::uniform(Side::Col);
        let est = estimate_coupling_time(&m, &cfg, &psi, &psi, &s1, &s2, 500, 0, 1).unwrap();
        assert!(est.uncensored().iter().all(|&t| t == 0));
        assert_eq!(est.censored + est.uncensored().len(), 500);
        let err = estimate_coupling_time(&m, &cfg, &psi, &psi, &s1, &s2, 3, 0, 2);
        assert!(matches!(err, Err(CouplingError::AllCensored { .. })) || err.is_ok());
    }

    #[test]
    fn lyapunov_constant_certificate() {
        let m = canon2();
        let ok = LyapunovCert { v: vec![3.0, 3.0], h: vec![1.0, 1.0], small_set: vec![0, 1], drift_c: 1.0 };
        let r = validate_lyapunov(&m, &ok);
        assert!(r.pass());
        assert_eq!(r.worst_slack, 0.0);
        let bad = LyapunovCert { h: vec![2.0, 2.0], ..ok };
        let r = validate_lyapunov(&m, &bad);
        assert!(!r.pass());
        assert_eq!(r.worst_slack, 1.0);
        assert_eq!(r.failures.len(), 8);
        assert!(r.failures.iter().all(|f| f.3 == 1.0));
    }

    #[test]
    fn lyapunov_birth_death_drift() {
        // UNCTRL2: E[V(X') | x] - V(x) with V = (0, 10)
        let m = unctrl2();
        let cert = LyapunovCert { v: vec![0.0, 10.0], h: vec![1.0, 1.0], small_set: vec![0], drift_c: 2.0 };
        let r = validate_lyapunov(&m, &cert);
        // x=0: 0.1*10 - 0 = 1 vs -1 + 2 = 1 -> slack 0
        // x=1: 0.6*10 - 10 = -4 vs -1 -> slack -3
        assert!(r.pass());
        assert!((r.worst_slack - 0.0).abs() < 1e-12);
        assert_eq!(r.worst_at, (0, 0, 0));
        assert_eq!(r.v_bound, 10.0);
    }
}
