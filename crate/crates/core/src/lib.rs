//! Solver and verification toolkit for finite zero-sum partially observable
//! stochastic games.
//!
//! The hidden-state game is reduced to a completely observable game on
//! beliefs. Discounted values and stationary saddle-point strategies come
//! from Shapley value iteration on a discretized belief simplex, the
//! average-payoff value is extracted by letting the discount tend to one, and
//! the coupling construction behind the relative-value bounds is available as
//! a simulator.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature pulls in
//! `std` and rayon and fans grid sweeps and Monte Carlo paths out over a
//! thread pool; results are bit-identical to the sequential build.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod average;
pub mod coupling;
pub mod filter;
pub mod grid;
pub mod matgame;
pub mod model;
mod par;
pub mod rng;
pub mod rollout;
pub mod shapley;
pub mod stats;

pub use average::{run_vanishing_discount, AlphaRecord, VanishingDiscountRun};
pub use coupling::{SplitChainConfig, SplitChainState};
pub use filter::Belief;
pub use grid::SimplexGrid;
pub use matgame::{GameSolution, MatrixGame, MixedAction, Side};
pub use model::{canonical_models, Dims, GameModel, LyapunovCert, RawModel, ValidationReport};
pub use rollout::{RolloutResult, Strategy};
pub use shapley::{StrategyTable, ValueTable};
