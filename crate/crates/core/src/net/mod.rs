//! Policy/value network, its losses and optimizer, and the replay buffer.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod mlp;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, OptState};
pub use buffer::ReplayBuffer;
pub use mlp::{entropy, policy_loss, softmax, value_loss, Gradients, LossBreakdown, NetParams, NetShape};

use crate::error::{contract, Result};

/// One supervised example produced by a search: input features, the
/// normalized root visit counts and the root value estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTarget {
    pub state_obs: Vec<f64>,
    pub policy_target: Vec<f64>,
    pub value_target: f64,
}

impl TrainingTarget {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.policy_target.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.policy_target.iter().any(|p| *p < 0.0) {
            return Err(contract(format!("policy target is not a distribution (sum {total})")));
        }
        if !self.value_target.is_finite() || self.state_obs.iter().any(|x| !x.is_finite()) {
            return Err(contract("training target has non-finite entries"));
        }
        Ok(())
    }
}
