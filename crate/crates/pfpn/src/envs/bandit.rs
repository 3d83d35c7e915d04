//! One-step bandit with an asymmetric two-peak reward landscape.

use std::collections::BTreeMap;

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::Result;

/// Peak locations of the reward landscape.
pub const PEAKS: [f64; 2] = [-0.25, 0.75];

/// Reward inversely proportional to the minimal distance to the two peaks:
/// `r(a) = 1 / (1 + 10 d(a))` with `d(a) = min(|a + 0.25|, |a - 0.75|)`.
pub fn bandit_reward(a: f64) -> f64 {
    let d = (a - PEAKS[0]).abs().min((a - PEAKS[1]).abs());
    1.0 / (1.0 + 10.0 * d)
}

/// Index of the peak closest to `a`.
pub fn nearest_peak(a: f64) -> usize {
    if (a - PEAKS[0]).abs() <= (a - PEAKS[1]).abs() {
        0
    } else {
        1
    }
}

/// Horizon-1 episode wrapper; the observation is a constant scalar 0 so the
/// policy must encode multimodality in its distribution. The m-dimensional
/// variant averages the 1-D landscape over dimensions.
#[derive(Debug, Clone)]
pub struct Bandit {
    dims: usize,
}

impl Bandit {
    pub fn new(dims: usize) -> Self {
        assert!(dims >= 1);
        Self { dims }
    }
}

impl Environment for Bandit {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 1,
            action_dim: self.dims,
            horizon: 1,
            reward_range: (0.0, 1.0),
        }
    }

    fn reset(&mut self) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        debug_assert_eq!(action.len(), self.dims);
        let reward = action
            .iter()
            .map(|&a| bandit_reward(a.clamp(-1.0, 1.0)))
            .sum::<f64>()
            / self.dims as f64;
        let mut info = BTreeMap::new();
        if self.dims == 1 {
            info.insert("nearest_peak", nearest_peak(action[0]) as f64);
        }
        Ok(StepResult {
            obs: vec![0.0],
            reward,
            done: true,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_score_one() {
        assert_eq!(bandit_reward(-0.25), 1.0);
        assert_eq!(bandit_reward(0.75), 1.0);
    }

    #[test]
    fn midpoint_arithmetic() {
        // a = 0.25 sits 0.5 from both peaks
        assert!((bandit_reward(0.25) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exactly_two_local_maxima_on_grid() {
        let res = 1e-3;
        let steps = (2.0 / res) as usize;
        let r = |i: usize| bandit_reward(-1.0 + i as f64 * res);
        let mut maxima = Vec::new();
        for i in 1..steps {
            if r(i) > r(i - 1) && r(i) > r(i + 1) {
                maxima.push(-1.0 + i as f64 * res);
            }
        }
        assert_eq!(maxima.len(), 2, "maxima at {maxima:?}");
        assert!((maxima[0] + 0.25).abs() < res + 1e-12);
        assert!((maxima[1] - 0.75).abs() < res + 1e-12);
    }

    #[test]
    fn one_step_episodes() {
        let mut env = Bandit::new(1);
        let obs = env.reset();
        assert_eq!(obs, vec![0.0]);
        let step = env.step(&[0.3]).unwrap();
        assert!(step.done);
        assert_eq!(step.info["nearest_peak"], 1.0);
        // reset is idempotent
        assert_eq!(env.reset(), env.reset());
    }

    #[test]
    fn multidim_reward_is_the_per_dimension_mean() {
        let mut env = Bandit::new(3);
        let action = [-0.25, 0.75, 0.1];
        let step = env.step(&action).unwrap();
        let oracle: f64 = action.iter().map(|&a| bandit_reward(a)).sum::<f64>() / 3.0;
        assert!((step.reward - oracle).abs() < 1e-15);
    }

    #[test]
    fn rewards_stay_in_declared_range() {
        let env = Bandit::new(1);
        let (lo, hi) = env.spec().reward_range;
        for i in 0..=2000 {
            let a = -1.0 + i as f64 * 1e-3;
            let r = bandit_reward(a);
            assert!(r >= lo && r <= hi);
        }
    }
}
