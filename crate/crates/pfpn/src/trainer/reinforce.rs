//! REINFORCE with a batch-mean baseline, for one-step bandit tasks.

use crate::error::{Error, Result};
use crate::policy::{HeadGrads, HeadOptimizer, PolicyHead};
use crate::trainer::rollout::RolloutBatch;
use crate::trainer::UpdateStats;

/// One full-batch policy-gradient step: `mean_t A_t grad log pi(a_t|s_t)`
/// with `A_t = r_t - mean(r)`. The baseline makes a constant-reward batch an
/// exact no-op.
pub fn reinforce_update(
    batch: &RolloutBatch,
    head: &mut PolicyHead<f64>,
    head_opt: &mut HeadOptimizer<f64>,
) -> Result<UpdateStats> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "reinforce_update on empty batch".into(),
        ));
    }
    let baseline = batch.rewards.iter().sum::<f64>() / n as f64;
    let mut grads = HeadGrads::zeros_like(head);
    let mut policy_loss = 0.0;
    let mut entropy_sum = 0.0;
    for t in 0..n {
        let adv = batch.rewards[t] - baseline;
        let (log_pi, entropy) = head.accumulate_objective_grad(
            &batch.states[t],
            &batch.actions[t],
            adv,
            0.0,
            &mut grads,
        )?;
        policy_loss -= adv * log_pi;
        entropy_sum += entropy;
    }
    policy_loss /= n as f64;
    if !policy_loss.is_finite() {
        return Err(Error::NonFiniteLoss("reinforce_update".into()));
    }
    grads.scale(-1.0 / n as f64);
    head_opt.apply(head, &grads)?;
    Ok(UpdateStats {
        policy_loss,
        value_loss: 0.0,
        clip_fraction: 0.0,
        approx_kl: 0.0,
        entropy: entropy_sum / n as f64,
    })
}
