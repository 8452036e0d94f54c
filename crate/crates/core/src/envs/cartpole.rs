use serde::{Deserialize, Serialize};

use super::constants::cartpole as k;
use crate::error::{config, Result};
use crate::mdp::{check_step, finish_step, EnvSpec, EnvState, Environment, Transition};
use crate::rng::RngStream;

/// Pole-balancing on a cart. Observation `(x, x_dot, theta, theta_dot)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_magnitude: f64,
    pub integration_dt: f64,
    pub angle_threshold: f64,
    pub position_threshold: f64,
    pub reset_spread: f64,
    pub max_episode_steps: u32,
    pub gamma: f64,
    /// Append `steps_taken / max_episode_steps` to the network input.
    pub time_feature: bool,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: k::GRAVITY,
            cart_mass: k::CART_MASS,
            pole_mass: k::POLE_MASS,
            pole_half_length: k::POLE_HALF_LENGTH,
            force_magnitude: k::FORCE_MAGNITUDE,
            integration_dt: k::DT,
            angle_threshold: k::ANGLE_THRESHOLD,
            position_threshold: k::POSITION_THRESHOLD,
            reset_spread: k::RESET_SPREAD,
            max_episode_steps: k::MAX_EPISODE_STEPS,
            gamma: 0.95,
            time_feature: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CartPole {
    params: CartPoleParams,
    spec: EnvSpec,
}

pub const PUSH_LEFT: usize = 0;
pub const PUSH_RIGHT: usize = 1;

impl CartPole {
    pub fn new(params: CartPoleParams) -> Result<Self> {
        let positive = [
            params.gravity,
            params.cart_mass,
            params.pole_mass,
            params.pole_half_length,
            params.force_magnitude,
            params.integration_dt,
            params.angle_threshold,
            params.position_threshold,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(config("cartpole constants must be positive and finite"));
        }
        let spec = EnvSpec {
            name: "cartpole".into(),
            action_count: 2,
            obs_dim: 4,
            max_episode_steps: params.max_episode_steps,
            gamma: params.gamma,
        };
        spec.validate().map_err(|e| config(e.to_string()))?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    /// One semi-implicit Euler update. Returns the new state and whether it
    /// violates the angle or position limit.
    pub fn dynamics(&self, obs: &[f64], action: usize) -> ([f64; 4], bool) {
        let p = &self.params;
        let (x, x_dot, theta, theta_dot) = (obs[0], obs[1], obs[2], obs[3]);
        let force = if action == PUSH_RIGHT {
            p.force_magnitude
        } else {
            -p.force_magnitude
        };
        let total_mass = p.cart_mass + p.pole_mass;
        let pole_mass_length = p.pole_mass * p.pole_half_length;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        let x_dot = x_dot + p.integration_dt * x_acc;
        let x = x + p.integration_dt * x_dot;
        let theta_dot = theta_dot + p.integration_dt * theta_acc;
        let theta = theta + p.integration_dt * theta_dot;

        let failed = x.abs() > p.position_threshold || theta.abs() > p.angle_threshold;
        ([x, x_dot, theta, theta_dot], failed)
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut RngStream) -> EnvState {
        let s = self.params.reset_spread;
        EnvState::initial((0..4).map(|_| rng.uniform_range(-s, s)).collect())
    }

    fn step(&self, state: &EnvState, action: usize, _rng: &mut RngStream) -> Result<Transition> {
        check_step(&self.spec, state, action)?;
        let (next, failed) = self.dynamics(&state.obs, action);
        // Survival reward is paid on the failing transition as well.
        Ok(finish_step(&self.spec, state, next.to_vec(), 1.0, failed))
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        let p = &self.params;
        let obs = &state.obs;
        let mut f = vec![
            obs[0] / p.position_threshold,
            obs[1] / 2.0,
            obs[2] / p.angle_threshold,
            obs[3] / 2.0,
        ];
        if p.time_feature {
            f.push(state.steps_taken as f64 / p.max_episode_steps as f64);
        }
        f
    }
}
