use serde::{Deserialize, Serialize};

use super::constants::mountaincar as k;
use crate::error::{config, Result};
use crate::mdp::{check_step, finish_step, EnvSpec, EnvState, Environment, Transition};
use crate::rng::RngStream;

/// Under-powered car in a valley. Observation `(position, velocity)`.
///
/// Uses the shaped reward variant: a small penalty per step and a unit
/// bonus on reaching the goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainCarParams {
    pub position_bounds: (f64, f64),
    pub velocity_bound: f64,
    pub force: f64,
    pub gravity_scale: f64,
    pub goal_position: f64,
    pub reset_bounds: (f64, f64),
    pub step_reward: f64,
    pub goal_reward: f64,
    pub max_episode_steps: u32,
    pub gamma: f64,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        Self {
            position_bounds: (k::MIN_POSITION, k::MAX_POSITION),
            velocity_bound: k::MAX_SPEED,
            force: k::FORCE,
            gravity_scale: k::GRAVITY,
            goal_position: k::GOAL_POSITION,
            reset_bounds: (k::RESET_LOW, k::RESET_HIGH),
            step_reward: k::STEP_REWARD,
            goal_reward: k::GOAL_REWARD,
            max_episode_steps: k::MAX_EPISODE_STEPS,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MountainCar {
    params: MountainCarParams,
    spec: EnvSpec,
}

pub const PUSH_LEFT: usize = 0;
pub const NO_PUSH: usize = 1;
pub const PUSH_RIGHT: usize = 2;

impl MountainCar {
    pub fn new(params: MountainCarParams) -> Result<Self> {
        let (lo, hi) = params.position_bounds;
        if !(lo < params.goal_position && params.goal_position <= hi) {
            return Err(config("mountaincar goal must lie within the position bounds"));
        }
        if !(params.step_reward < 0.0 && params.goal_reward > 0.0) {
            return Err(config("mountaincar needs step_reward < 0 < goal_reward"));
        }
        if !(params.velocity_bound > 0.0 && params.force > 0.0 && params.gravity_scale > 0.0) {
            return Err(config("mountaincar constants must be positive"));
        }
        let spec = EnvSpec {
            name: "mountaincar".into(),
            action_count: 3,
            obs_dim: 2,
            max_episode_steps: params.max_episode_steps,
            gamma: params.gamma,
        };
        spec.validate().map_err(|e| config(e.to_string()))?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &MountainCarParams {
        &self.params
    }

    /// Returns `(position, velocity, reached_goal)`.
    pub fn dynamics(&self, obs: &[f64], action: usize) -> (f64, f64, bool) {
        let p = &self.params;
        let (lo, hi) = p.position_bounds;
        let (position, velocity) = (obs[0], obs[1]);
        let mut velocity = velocity + (action as f64 - 1.0) * p.force
            - (3.0 * position).cos() * p.gravity_scale;
        velocity = velocity.clamp(-p.velocity_bound, p.velocity_bound);
        let position = (position + velocity).clamp(lo, hi);
        if position <= lo && velocity < 0.0 {
            velocity = 0.0;
        }
        (position, velocity, position >= p.goal_position)
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut RngStream) -> EnvState {
        let (lo, hi) = self.params.reset_bounds;
        EnvState::initial(vec![rng.uniform_range(lo, hi), 0.0])
    }

    fn step(&self, state: &EnvState, action: usize, _rng: &mut RngStream) -> Result<Transition> {
        check_step(&self.spec, state, action)?;
        let (position, velocity, goal) = self.dynamics(&state.obs, action);
        let reward = if goal {
            self.params.goal_reward
        } else {
            self.params.step_reward
        };
        Ok(finish_step(&self.spec, state, vec![position, velocity], reward, goal))
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        let obs = &state.obs;
        let (lo, hi) = self.params.position_bounds;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        vec![(obs[0] - mid) / half, obs[1] / self.params.velocity_bound]
    }
}
