//! Belief states and the Bayes filter that carries them forward.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::GameModel;

/// Masses below this are treated as zero when normalizing.
pub const UNDERFLOW: f64 = 1e-300;

/// A probability vector over hidden states. Normalized on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FilterError {
    /// The observation has (numerically) zero probability under the belief
    /// and actions that were supplied.
    ZeroProbabilityObservation { y: usize, mass: f64 },
    ZeroProbabilityHistory,
    NotAProbability,
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    HistoryTooLong(usize),
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::ZeroProbabilityObservation { y, mass } => {
                write!(f, "observation {} has probability {:e} under the current belief", y, mass)
            }
            FilterError::ZeroProbabilityHistory => write!(f, "history has zero probability"),
            FilterError::NotAProbability => write!(f, "vector is not a probability distribution"),
            FilterError::IndexOutOfRange { what, index, len } => {
                write!(f, "{} index {} out of range (size {})", what, index, len)
            }
            FilterError::HistoryTooLong(t) => write!(f, "history of length {} exceeds the oracle cap of 4", t),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FilterError {}

impl Belief {
    /// Normalizes nonnegative masses into a belief.
    pub fn new(mut probs: Vec<f64>) -> Result<Belief, FilterError> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FilterError::NotAProbability);
        }
        let s: f64 = probs.iter().sum();
        if s <= UNDERFLOW {
            return Err(FilterError::NotAProbability);
        }
        for p in probs.iter_mut() {
            *p /= s;
        }
        Ok(Belief { probs })
    }

    pub fn point_mass(n: usize, x: usize) -> Belief {
        let mut probs = vec![0.0; n];
        probs[x] = 1.0;
        Belief { probs }
    }

    pub fn uniform(n: usize) -> Belief {
        Belief { probs: vec![1.0 / n as f64; n] }
    }

    pub fn initial(model: &GameModel) -> Belief {
        Belief { probs: model.initial_belief().to_vec() }
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

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<(), FilterError> {
    if index < len {
        Ok(())
    } else {
        Err(FilterError::IndexOutOfRange { what, index, len })
    }
}

fn check_actions(model: &GameModel, psi: &Belief, u: usize, v: usize) -> Result<(), FilterError> {
    if psi.len() != model.num_states() {
        return Err(FilterError::NotAProbability);
    }
    check_index("player 1 action", u, model.num_actions_p1())?;
    check_index("player 2 action", v, model.num_actions_p2())
}

/// Unnormalized next-state masses `sum_x psi[x] p(z, y | x, u, v)`.
fn joint_masses(model: &GameModel, psi: &[f64], u: usize, v: usize, y: usize, out: &mut [f64]) {
    let ny = model.num_obs();
    out.iter_mut().for_each(|m| *m = 0.0);
    for (x, &px) in psi.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let slice = model.kernel_slice(x, u, v);
        for (z, m) in out.iter_mut().enumerate() {
            *m += px * slice[z * ny + y];
        }
    }
}

/// One step of the filtering recursion: the posterior over the next state
/// after actions `(u, v)` and observation `y`.
pub fn filter_update(model: &GameModel, psi: &Belief, u: usize, v: usize, y: usize) -> Result<Belief, FilterError> {
    check_actions(model, psi, u, v)?;
    check_index("observation", y, model.num_obs())?;
    let mut probs = vec![0.0; model.num_states()];
    joint_masses(model, &psi.probs, u, v, y, &mut probs);
    let mass: f64 = probs.iter().sum();
    if mass <= UNDERFLOW {
        return Err(FilterError::ZeroProbabilityObservation { y, mass });
    }
    for p in probs.iter_mut() {
        *p /= mass;
    }
    Ok(Belief { probs })
}

/// Predictive law of the next observation, `P(Y' = y | psi, u, v)`.
pub fn obs_predictive(model: &GameModel, psi: &Belief, u: usize, v: usize) -> Vec<f64> {
    let (nx, ny) = (model.num_states(), model.num_obs());
    let mut out = vec![0.0; ny];
    for (x, &px) in psi.probs.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let slice = model.kernel_slice(x, u, v);
        for z in 0..nx {
            for (y, o) in out.iter_mut().enumerate() {
                *o += px * slice[z * ny + y];
            }
        }
    }
    out
}

/// Expected stage cost under the belief, `sum_x psi[x] c(x, u, v)`.
pub fn stage_cost(model: &GameModel, psi: &Belief, u: usize, v: usize) -> f64 {
    psi.probs.iter().enumerate().map(|(x, &p)| p * model.cost(x, u, v)).sum()
}

/// One step of an action/observation history: actions taken, then the
/// observation that followed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub u: usize,
    pub v: usize,
    pub y: usize,
}

pub const ORACLE_MAX_HISTORY: usize = 4;

/// Posterior of the current state given a history, by enumerating every
/// state path `x_0 .. x_T` and summing joint probabilities. Strategy
/// probabilities are common factors of every path and cancel. Exponential in
/// `T`, so histories are capped at four steps.
pub fn brute_force_posterior(model: &GameModel, history: &[Step]) -> Result<Belief, FilterError> {
    let t = history.len();
    if t > ORACLE_MAX_HISTORY {
        return Err(FilterError::HistoryTooLong(t));
    }
    for s in history {
        check_index("player 1 action", s.u, model.num_actions_p1())?;
        check_index("player 2 action", s.v, model.num_actions_p2())?;
        check_index("observation", s.y, model.num_obs())?;
    }
    let nx = model.num_states();
    let mut post = vec![0.0; nx];
    let mut path = vec![0usize; t + 1];
    let total_paths = nx.pow((t + 1) as u32);
    for code in 0..total_paths {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % nx;
            c /= nx;
        }
        let mut w = model.initial_belief()[path[0]];
        for (k, s) in history.iter().enumerate() {
            if w == 0.0 {
                break;
            }
            w *= model.kernel(path[k], s.u, s.v, path[k + 1], s.y);
        }
        post[path[t]] += w;
    }
    let total: f64 = post.iter().sum();
    if total <= 0.0 {
        return Err(FilterError::ZeroProbabilityHistory);
    }
    for p in post.iter_mut() {
        *p /= total;
    }
    Ok(Belief { probs: post })
}
