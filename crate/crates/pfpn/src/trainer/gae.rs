//! Generalized advantage estimation.

use crate::trainer::rollout::RolloutBatch;

/// Fills `advantages` and `returns` in place:
/// `delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)` accumulated with
/// factor `gamma * lambda`, bootstrapped per chunk; `returns = A + V`.
pub fn compute_gae(batch: &mut RolloutBatch, gamma: f64, lambda: f64) {
    let mut start = 0;
    for chunk in &batch.chunks {
        let end = chunk.end;
        let mut next_adv = 0.0;
        for t in (start..end).rev() {
            let next_value = if t + 1 == end {
                chunk.bootstrap_value
            } else {
                batch.values[t + 1]
            };
            let mask = if batch.dones[t] { 0.0 } else { 1.0 };
            let delta = batch.rewards[t] + gamma * next_value * mask - batch.values[t];
            next_adv = delta + gamma * lambda * mask * next_adv;
            batch.advantages[t] = next_adv;
            batch.returns[t] = next_adv + batch.values[t];
        }
        start = end;
    }
}

/// Rescales advantages to zero mean and unit (population) variance; a
/// constant batch maps to all zeros.
pub fn normalize_advantages(batch: &mut RolloutBatch) {
    let n = batch.advantages.len();
    if n == 0 {
        return;
    }
    let mean = batch.advantages.iter().sum::<f64>() / n as f64;
    let var = batch
        .advantages
        .iter()
        .map(|a| (a - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    if std > 0.0 {
        for a in &mut batch.advantages {
            *a = (*a - mean) / std;
        }
    } else {
        for a in &mut batch.advantages {
            *a = 0.0;
        }
    }
}
