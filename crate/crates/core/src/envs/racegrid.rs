use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::mdp::{check_step, finish_step, EnvSpec, EnvState, Environment, Transition};
use crate::rng::RngStream;

/// Planar navigation to a circular goal inside the unit square.
/// Observation `(x, y)`. Actions: north, east, south, west, stay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaceGridParams {
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub move_step: f64,
    /// Initial positions are drawn uniformly from this box, clamped to the arena.
    pub start_center: [f64; 2],
    pub start_spread: f64,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub max_episode_steps: u32,
    pub gamma: f64,
}

impl Default for RaceGridParams {
    fn default() -> Self {
        Self {
            goal_center: [0.8, 0.8],
            goal_radius: 0.08,
            move_step: 0.05,
            start_center: [0.2, 0.2],
            start_spread: 0.1,
            step_reward: -0.01,
            goal_reward: 1.0,
            max_episode_steps: 200,
            gamma: 1.0,
        }
    }
}

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const STAY: usize = 4;

/// Unit displacement per action.
pub const MOVES: [[f64; 2]; 5] = [[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 0.0]];

#[derive(Clone, Debug)]
pub struct RaceGrid {
    params: RaceGridParams,
    spec: EnvSpec,
}

impl RaceGrid {
    pub fn new(params: RaceGridParams) -> Result<Self> {
        let [gx, gy] = params.goal_center;
        let r = params.goal_radius;
        if !(r > 0.0 && gx - r >= 0.0 && gx + r <= 1.0 && gy - r >= 0.0 && gy + r <= 1.0) {
            return Err(config("racegrid goal must lie fully inside the unit square"));
        }
        if !(params.move_step > 0.0) {
            return Err(config("racegrid move_step must be positive"));
        }
        if !(params.start_spread >= 0.0) {
            return Err(config("racegrid start_spread must be nonnegative"));
        }
        let spec = EnvSpec {
            name: "racegrid".into(),
            action_count: MOVES.len(),
            obs_dim: 2,
            max_episode_steps: params.max_episode_steps,
            gamma: params.gamma,
        };
        spec.validate().map_err(|e| config(e.to_string()))?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &RaceGridParams {
        &self.params
    }

    pub fn in_goal(&self, x: f64, y: f64) -> bool {
        let [gx, gy] = self.params.goal_center;
        (x - gx).hypot(y - gy) <= self.params.goal_radius
    }

    pub fn moved(&self, obs: &[f64], action: usize) -> [f64; 2] {
        let [dx, dy] = MOVES[action];
        let s = self.params.move_step;
        [
            (obs[0] + dx * s).clamp(0.0, 1.0),
            (obs[1] + dy * s).clamp(0.0, 1.0),
        ]
    }
}

impl Environment for RaceGrid {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut RngStream) -> EnvState {
        let [cx, cy] = self.params.start_center;
        let s = self.params.start_spread;
        let x = rng.uniform_range(cx - s, cx + s).clamp(0.0, 1.0);
        let y = rng.uniform_range(cy - s, cy + s).clamp(0.0, 1.0);
        EnvState::initial(vec![x, y])
    }

    fn step(&self, state: &EnvState, action: usize, _rng: &mut RngStream) -> Result<Transition> {
        check_step(&self.spec, state, action)?;
        let [x, y] = self.moved(&state.obs, action);
        let goal = self.in_goal(x, y);
        let reward = if goal {
            self.params.goal_reward
        } else {
            self.params.step_reward
        };
        Ok(finish_step(&self.spec, state, vec![x, y], reward, goal))
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        state.obs.iter().map(|v| 2.0 * v - 1.0).collect()
    }

    fn planar_bounds(&self) -> Option<[(f64, f64); 2]> {
        Some([(0.0, 1.0), (0.0, 1.0)])
    }
}
