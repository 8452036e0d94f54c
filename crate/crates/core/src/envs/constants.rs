//! Physics constants of the classic-control benchmark tasks.
//!
//! Values match the Gym `CartPole-v1` / `MountainCar-v0` sources. Bump
//! [`CONSTANTS_VERSION`] whenever any default changes.

pub const CONSTANTS_VERSION: &str = "classic-control/1";

pub mod cartpole {
    pub const GRAVITY: f64 = 9.8;
    pub const CART_MASS: f64 = 1.0;
    pub const POLE_MASS: f64 = 0.1;
    /// Half the pole length.
    pub const POLE_HALF_LENGTH: f64 = 0.5;
    pub const FORCE_MAGNITUDE: f64 = 10.0;
    pub const DT: f64 = 0.02;
    /// 12 degrees.
    pub const ANGLE_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    pub const POSITION_THRESHOLD: f64 = 2.4;
    pub const RESET_SPREAD: f64 = 0.05;
    pub const MAX_EPISODE_STEPS: u32 = 200;
}

pub mod mountaincar {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.5;
    pub const FORCE: f64 = 0.001;
    pub const GRAVITY: f64 = 0.0025;
    pub const RESET_LOW: f64 = -0.6;
    pub const RESET_HIGH: f64 = -0.4;
    pub const STEP_REWARD: f64 = -0.005;
    pub const GOAL_REWARD: f64 = 1.0;
    pub const MAX_EPISODE_STEPS: u32 = 1000;
}
