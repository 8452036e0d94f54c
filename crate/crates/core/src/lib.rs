//! Multi-step approximate real-time dynamic programming: MCTS planning
//! guided by a learned policy/value network, with the network trained on
//! search outputs, all under a fixed total compute budget.
//!
//! Layers, bottom up: [`rng`] and [`mdp`] (environment contract), [`envs`]
//! (benchmark tasks), [`oracle`] (exact DP and exhaustive search), [`net`]
//! (MLP, losses, ADAM, replay), [`mcts`] (planner), [`agent`] (plan / learn /
//! act loop) and [`harness`] (budget sweeps, aggregation, entropy maps).

pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mcts;
pub mod mdp;
pub mod net;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
