//! Environment interface, transitions and return accounting.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::rng::RngStream;

/// An environment observation plus episode bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub obs: Vec<f64>,
    pub steps_taken: u32,
    /// Set once the episode has ended; such a state accepts no further steps.
    pub terminal: bool,
}

impl EnvState {
    pub fn initial(obs: Vec<f64>) -> Self {
        Self {
            obs,
            steps_taken: 0,
            terminal: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub next_state: EnvState,
    pub reward: f64,
    pub terminal: bool,
}

/// Static description of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub action_count: usize,
    pub obs_dim: usize,
    pub max_episode_steps: u32,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.action_count < 2 {
            return Err(contract(format!("{}: action_count must be >= 2", self.name)));
        }
        if self.obs_dim == 0 || self.max_episode_steps == 0 {
            return Err(contract(format!(
                "{}: obs_dim and max_episode_steps must be positive",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(contract(format!("{}: gamma must lie in [0, 1]", self.name)));
        }
        Ok(())
    }
}

/// A discrete-action episodic MDP with a perfect, queryable model.
///
/// Implementations are pure: `step` depends only on its arguments, so the
/// planner may call it on any state it has seen.
pub trait Environment: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Sample an initial state.
    fn reset(&self, rng: &mut RngStream) -> EnvState;

    /// Advance one step from `state`.
    fn step(&self, state: &EnvState, action: usize, rng: &mut RngStream) -> Result<Transition>;

    /// Network input for a state. Defaults to the raw observation.
    fn features(&self, state: &EnvState) -> Vec<f64> {
        state.obs.clone()
    }

    /// Bounds of a planar state space `[(x_lo, x_hi), (y_lo, y_hi)]`, for
    /// environments whose whole state is a 2D position.
    fn planar_bounds(&self) -> Option<[(f64, f64); 2]> {
        None
    }
}

/// Shared precondition check for `Environment::step`.
pub fn check_step(spec: &EnvSpec, state: &EnvState, action: usize) -> Result<()> {
    if action >= spec.action_count {
        return Err(contract(format!(
            "{}: action {action} out of range (action_count {})",
            spec.name, spec.action_count
        )));
    }
    if state.terminal {
        return Err(contract(format!("{}: step on a terminal state", spec.name)));
    }
    if state.obs.len() != spec.obs_dim {
        return Err(contract(format!(
            "{}: observation has {} components, expected {}",
            spec.name,
            state.obs.len(),
            spec.obs_dim
        )));
    }
    Ok(())
}

/// Build the transition for a new observation, applying the episode step cap.
pub fn finish_step(
    spec: &EnvSpec,
    state: &EnvState,
    obs: Vec<f64>,
    reward: f64,
    done: bool,
) -> Transition {
    let steps_taken = state.steps_taken + 1;
    let terminal = done || steps_taken >= spec.max_episode_steps;
    Transition {
        next_state: EnvState {
            obs,
            steps_taken,
            terminal,
        },
        reward,
        terminal,
    }
}

/// `sum_k gamma^k * rewards[k]`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    // Horner form from the back: G = r_0 + gamma * (r_1 + gamma * (...)).
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}
