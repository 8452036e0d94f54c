use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, NetParams};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptState {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update.
pub fn adam_step(params: &mut NetParams, grads: &Gradients, opt: &mut OptState) -> Result<()> {
    let n = params.flat().len();
    if grads.0.len() != n || opt.first_moment.len() != n || opt.second_moment.len() != n {
        return Err(contract("optimizer state, gradients and parameters differ in size"));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = opt.config;
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let weights = params.flat_mut();
    for i in 0..n {
        let g = grads.0[i];
        // Moments of parameters with persistently zero gradient (dead ReLU
        // units) decay geometrically into subnormals, which are very slow on
        // x86; flush them instead.
        let m = flush_subnormal(beta1 * opt.first_moment[i] + (1.0 - beta1) * g);
        let v = flush_subnormal(beta2 * opt.second_moment[i] + (1.0 - beta2) * g * g);
        opt.first_moment[i] = m;
        opt.second_moment[i] = v;
        weights[i] -= lr * (m / c1) / ((v / c2).sqrt() + epsilon);
    }
    Ok(())
}

fn flush_subnormal(x: f64) -> f64 {
    if x.is_subnormal() {
        0.0
    } else {
        x
    }
}
