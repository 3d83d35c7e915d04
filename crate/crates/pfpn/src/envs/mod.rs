//! Desk-scale environments with multimodal reward landscapes behind a uniform
//! reset/step interface: the asymmetric two-peak bandit (one-step), its
//! multi-dimensional extension, and a two-goal point-mass control task.

mod bandit;
mod pointmass;

use std::collections::BTreeMap;

pub use bandit::{bandit_reward, Bandit};
pub use pointmass::PointMass;

use crate::error::{Error, Result};

/// Static description of an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub reward_range: (f64, f64),
}

/// One transition. `info` carries diagnostics such as the nearest peak/goal.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<&'static str, f64>,
}

/// Uniform environment interface. All implementations are pure functions of
/// (state, action); trajectories replay bit-exactly.
pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

/// Builds an environment from its config name: `bandit1d`, `banditNd`
/// (requires `dims`), or `pointmass2g`.
pub fn make_env(name: &str, dims: Option<usize>) -> Result<Box<dyn Environment>> {
    match name {
        "bandit1d" => Ok(Box::new(Bandit::new(1))),
        "banditNd" => {
            let m = dims.ok_or_else(|| {
                Error::Config("env `banditNd` needs `dims` to be set".into())
            })?;
            if m == 0 {
                return Err(Error::Config("banditNd dims must be >= 1".into()));
            }
            Ok(Box::new(Bandit::new(m)))
        }
        "pointmass2g" => Ok(Box::new(PointMass::new())),
        other => Err(Error::UnknownEnvironment(other.to_string())),
    }
}
