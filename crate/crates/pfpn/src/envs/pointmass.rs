//! Two-goal point-mass control: accelerate a particle toward either of two
//! symmetric goals under a dense distance reward with an action cost.

use std::collections::BTreeMap;

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::Result;

pub const GOALS: [[f64; 2]; 2] = [[-0.5, 0.5], [0.5, 0.5]];
pub const DT: f64 = 0.05;
pub const VEL_CLAMP: f64 = 2.0;
pub const HORIZON: usize = 100;

#[derive(Debug, Clone)]
pub struct PointMass {
    pos: [f64; 2],
    vel: [f64; 2],
    steps: usize,
}

impl PointMass {
    pub fn new() -> Self {
        Self {
            pos: [0.0, 0.0],
            vel: [0.0, 0.0],
            steps: 0,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_state(pos: [f64; 2], vel: [f64; 2]) -> Self {
        Self {
            pos,
            vel,
            steps: 0,
        }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    fn nearest_goal(&self) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, g) in GOALS.iter().enumerate() {
            let d = ((self.pos[0] - g[0]).powi(2) + (self.pos[1] - g[1]).powi(2)).sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMass {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 4,
            action_dim: 2,
            horizon: HORIZON,
            reward_range: (-0.02, 1.0),
        }
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = [0.0, 0.0];
        self.vel = [0.0, 0.0];
        self.steps = 0;
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        debug_assert_eq!(action.len(), 2);
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        // semi-implicit Euler with a velocity clamp
        for i in 0..2 {
            self.vel[i] = (self.vel[i] + a[i] * DT).clamp(-VEL_CLAMP, VEL_CLAMP);
            self.pos[i] += self.vel[i] * DT;
        }
        self.steps += 1;
        let (goal, dist) = self.nearest_goal();
        let reward = (-4.0 * dist).exp() - 0.01 * (a[0] * a[0] + a[1] * a[1]);
        let mut info = BTreeMap::new();
        info.insert("nearest_goal", goal as f64);
        info.insert("goal_distance", dist);
        Ok(StepResult {
            obs: self.obs(),
            reward,
            done: self.steps >= HORIZON,
            info,
        })
    }
}
