//! Native implementations of the benchmark tasks.

pub mod cartpole;
pub mod constants;
pub mod mountaincar;
pub mod racegrid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cartpole::{CartPole, CartPoleParams};
pub use mountaincar::{MountainCar, MountainCarParams};
pub use racegrid::{RaceGrid, RaceGridParams};

use crate::error::{config, Error, Result};
use crate::mdp::{EnvSpec, EnvState, Environment, Transition};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    MountainCar,
    RaceGrid,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::CartPole, EnvKind::MountainCar, EnvKind::RaceGrid];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCar => "mountaincar",
            EnvKind::RaceGrid => "racegrid",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config(format!("unknown environment `{s}` (cartpole | mountaincar | racegrid)")))
    }
}

/// Per-task constant overrides. Only the section for the selected task is used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    pub cartpole: CartPoleParams,
    pub mountaincar: MountainCarParams,
    pub racegrid: RaceGridParams,
}

/// A concrete task, dispatching statically to its implementation.
#[derive(Clone, Debug)]
pub enum Env {
    CartPole(CartPole),
    MountainCar(MountainCar),
    RaceGrid(RaceGrid),
}

impl Env {
    pub fn new(kind: EnvKind, params: &EnvParams) -> Result<Self> {
        Ok(match kind {
            EnvKind::CartPole => Env::CartPole(CartPole::new(params.cartpole.clone())?),
            EnvKind::MountainCar => Env::MountainCar(MountainCar::new(params.mountaincar.clone())?),
            EnvKind::RaceGrid => Env::RaceGrid(RaceGrid::new(params.racegrid.clone())?),
        })
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            Env::CartPole(_) => EnvKind::CartPole,
            Env::MountainCar(_) => EnvKind::MountainCar,
            Env::RaceGrid(_) => EnvKind::RaceGrid,
        }
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            Env::CartPole(e) => e,
            Env::MountainCar(e) => e,
            Env::RaceGrid(e) => e,
        }
    }
}

impl Environment for Env {
    fn spec(&self) -> &EnvSpec {
        self.inner().spec()
    }

    fn reset(&self, rng: &mut RngStream) -> EnvState {
        self.inner().reset(rng)
    }

    fn step(&self, state: &EnvState, action: usize, rng: &mut RngStream) -> Result<Transition> {
        self.inner().step(state, action, rng)
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        self.inner().features(state)
    }

    fn planar_bounds(&self) -> Option<[(f64, f64); 2]> {
        self.inner().planar_bounds()
    }
}
