//! Policy entropy over a planar state space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{EnvState, Environment};
use crate::net::{entropy, NetParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCell {
    pub x: f64,
    pub y: f64,
    /// Nats.
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyMap {
    pub episode: u64,
    pub resolution: usize,
    pub cells: Vec<EntropyCell>,
}

/// Evaluate the policy head on a `resolution x resolution` grid spanning the
/// environment's planar state space, bounds included.
pub fn entropy_map<E: Environment + ?Sized>(
    params: &NetParams,
    env: &E,
    resolution: usize,
    episode: u64,
) -> Result<EntropyMap> {
    let [(x_lo, x_hi), (y_lo, y_hi)] = env.planar_bounds().ok_or_else(|| {
        Error::UnsupportedEnv(format!("{} has no planar state space", env.spec().name))
    })?;
    if resolution < 2 {
        return Err(Error::Config("entropy map resolution must be at least 2".into()));
    }
    let max_entropy = (env.spec().action_count as f64).ln();
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        let y = step(y_lo, y_hi, iy);
        for ix in 0..resolution {
            let x = step(x_lo, x_hi, ix);
            let (policy, _) = params.forward(&env.features(&EnvState::initial(vec![x, y])))?;
            cells.push(EntropyCell {
                x,
                y,
                // Rounding can overshoot the bounds by an ulp.
                entropy: entropy(&policy).clamp(0.0, max_entropy),
            });
        }
    }
    Ok(EntropyMap {
        episode,
        resolution,
        cells,
    })
}
