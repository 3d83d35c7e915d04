//! PPO clipped-surrogate update.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::adam::{adam_step, AdamState};
use crate::numerics::{Mlp, MlpGrads};
use crate::policy::{HeadGrads, HeadOptimizer, PolicyHead};
use crate::trainer::rollout::RolloutBatch;
use crate::trainer::{TrainerConfig, UpdateStats};

/// Per-sample clipped surrogate `min(ratio * A, clip(ratio, 1 +- c) * A)` and
/// the coefficient of `d log pi` on its active branch (zero when clipping
/// binds).
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, ratio * advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Runs `epochs` passes of shuffled minibatches over the batch, taking one
/// Adam step per minibatch on the policy (trunk, final layer, particles) and
/// the value network. The loss is
/// `-mean(min(rho A, clip(rho) A)) - entropy_coef * H + value_coef * MSE`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    batch: &RolloutBatch,
    head: &mut PolicyHead<f64>,
    head_opt: &mut HeadOptimizer<f64>,
    value_net: &mut Mlp<f64>,
    value_opt: &mut AdamState<f64>,
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument("ppo_update on empty batch".into()));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = StatsAccumulator::default();

    for _epoch in 0..cfg.epochs {
        indices.shuffle(rng);
        for mb in indices.chunks(cfg.minibatch_size.min(n)) {
            let bsz = mb.len() as f64;
            let mut head_grads = HeadGrads::zeros_like(head);
            let mut value_grads = MlpGrads::zeros_like(value_net);
            let mut policy_loss = 0.0;
            let mut value_loss = 0.0;
            let mut entropy_sum = 0.0;
            let mut kl_sum = 0.0;
            let mut clipped_count = 0usize;

            for &t in mb {
                let state = &batch.states[t];
                let action = &batch.actions[t];
                let adv = batch.advantages[t];

                // probe forward once to get the fresh log-prob for the ratio
                let log_pi = head.log_prob(state, action)?;
                let ratio = (log_pi - batch.log_probs[t]).exp();
                let (objective, coef) = clipped_objective(ratio, adv, cfg.clip_range);
                policy_loss -= objective;
                kl_sum += batch.log_probs[t] - log_pi;
                if (ratio - 1.0).abs() > cfg.clip_range {
                    clipped_count += 1;
                }

                let (_, entropy) = head.accumulate_objective_grad(
                    state,
                    action,
                    coef,
                    cfg.entropy_coef,
                    &mut head_grads,
                )?;
                entropy_sum += entropy;

                let (v, cache) = value_net.forward(state)?;
                let err = v[0] - batch.returns[t];
                value_loss += err * err;
                let (vg, _) =
                    value_net.backward(&cache, &[2.0 * cfg.value_coef * err / bsz])?;
                value_grads.add_assign(&vg);
            }

            policy_loss /= bsz;
            value_loss /= bsz;
            let total = policy_loss - cfg.entropy_coef * entropy_sum / bsz
                + cfg.value_coef * value_loss;
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "ppo_update: policy {policy_loss}, value {value_loss}"
                )));
            }

            // gradients of the maximized objective become loss gradients
            head_grads.scale(-1.0 / bsz);
            head_opt.apply(head, &head_grads)?;
            adam_step(value_opt, value_net, &value_grads)?;

            stats.add(
                policy_loss,
                value_loss,
                clipped_count as f64 / bsz,
                kl_sum / bsz,
                entropy_sum / bsz,
            );
        }
    }
    Ok(stats.finish())
}

#[derive(Default)]
pub(crate) struct StatsAccumulator {
    policy_loss: f64,
    value_loss: f64,
    clip_fraction: f64,
    approx_kl: f64,
    entropy: f64,
    count: usize,
}

impl StatsAccumulator {
    pub(crate) fn add(
        &mut self,
        policy_loss: f64,
        value_loss: f64,
        clip_fraction: f64,
        approx_kl: f64,
        entropy: f64,
    ) {
        self.policy_loss += policy_loss;
        self.value_loss += value_loss;
        self.clip_fraction += clip_fraction;
        self.approx_kl += approx_kl;
        self.entropy += entropy;
        self.count += 1;
    }

    pub(crate) fn finish(self) -> UpdateStats {
        let c = self.count.max(1) as f64;
        UpdateStats {
            policy_loss: self.policy_loss / c,
            value_loss: self.value_loss / c,
            clip_fraction: self.clip_fraction / c,
            approx_kl: self.approx_kl / c,
            entropy: self.entropy / c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use crate::numerics::{Activation, AdamConfig};
    use crate::trainer::gae::{compute_gae, normalize_advantages};
    use crate::trainer::rollout::{collect_rollout, Worker};
    use crate::trainer::Algorithm;
    use rand::SeedableRng;

    #[test]
    fn clip_arithmetic() {
        // ratio forced to 1.5 with positive advantage clips at 1.2
        let (obj, coef) = clipped_objective(1.5, 2.0, 0.2);
        assert!((obj - 2.4).abs() < 1e-15);
        assert_eq!(coef, 0.0);
        // inside the trust region the unclipped branch is active
        let (obj, coef) = clipped_objective(1.1, 2.0, 0.2);
        assert!((obj - 2.2).abs() < 1e-15);
        assert!((coef - 2.2).abs() < 1e-15);
        // negative advantage clips on the low side
        let (obj, _) = clipped_objective(0.5, -1.0, 0.2);
        assert!((obj + 0.8).abs() < 1e-15);
    }

    fn setup(seed: u64) -> (PolicyHead<f64>, HeadOptimizer<f64>, Mlp<f64>, AdamState<f64>, RolloutBatch) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = PolicyHead::pfpn(1, &[16, 16], 8, 1, &mut rng).unwrap();
        let value = Mlp::he_init(&[1, 16, 1], Activation::Identity, &mut rng);
        let head_opt = HeadOptimizer::new(&head, AdamConfig::with_lr(3e-3));
        let value_opt = AdamState::new(&value, AdamConfig::with_lr(3e-3));
        let mut worker = Worker::new(
            make_env("bandit1d", None).unwrap(),
            ChaCha8Rng::seed_from_u64(seed + 1),
        );
        let mut batch = collect_rollout(&mut worker, &head, &value, 256, None).unwrap();
        compute_gae(&mut batch, 0.95, 0.95);
        normalize_advantages(&mut batch);
        (head, head_opt, value, value_opt, batch)
    }

    fn cfg() -> TrainerConfig {
        TrainerConfig {
            algorithm: Algorithm::Ppo,
            epochs: 1,
            minibatch_size: 256,
            lr: 3e-3,
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn zero_advantages_leave_policy_unchanged() {
        let (mut head, mut head_opt, mut value, mut value_opt, mut batch) = setup(21);
        for a in &mut batch.advantages {
            *a = 0.0;
        }
        let before = head.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let stats = ppo_update(
            &batch,
            &mut head,
            &mut head_opt,
            &mut value,
            &mut value_opt,
            &cfg(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(
            head.final_bias(),
            before.final_bias(),
            "policy must not move"
        );
        assert_eq!(
            head.particles().unwrap().mu_flat(),
            before.particles().unwrap().mu_flat()
        );
        assert!(stats.policy_loss.abs() < 1e-12);
    }

    #[test]
    fn ratio_is_one_before_any_update() {
        let (head, _, _, _, batch) = setup(23);
        for t in 0..batch.len() {
            let lp = head.log_prob(&batch.states[t], &batch.actions[t]).unwrap();
            let ratio = (lp - batch.log_probs[t]).exp();
            assert!((ratio - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn one_update_decreases_the_surrogate_loss() {
        let (mut head, mut head_opt, mut value, mut value_opt, batch) = setup(24);

        let surrogate = |h: &PolicyHead<f64>| -> f64 {
            let mut loss = 0.0;
            for t in 0..batch.len() {
                let lp = h.log_prob(&batch.states[t], &batch.actions[t]).unwrap();
                let ratio = (lp - batch.log_probs[t]).exp();
                let (obj, _) = clipped_objective(ratio, batch.advantages[t], 0.2);
                loss -= obj;
            }
            loss / batch.len() as f64
        };

        let before = surrogate(&head);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        ppo_update(
            &batch,
            &mut head,
            &mut head_opt,
            &mut value,
            &mut value_opt,
            &cfg(),
            &mut rng,
        )
        .unwrap();
        let after = surrogate(&head);
        assert!(after < before, "loss went {before} -> {after}");
    }
}
