//! Rollout collection and batch storage.

use rand_chacha::ChaCha8Rng;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::numerics::Mlp;
use crate::policy::PolicyHead;
use crate::resampling::WeightTracker;

/// Persistent per-worker state: a private environment, its current
/// observation, the running episode return, and a private rng stream.
pub struct Worker {
    pub env: Box<dyn Environment>,
    pub obs: Vec<f64>,
    pub episode_return: f64,
    pub rng: ChaCha8Rng,
}

impl Worker {
    pub fn new(mut env: Box<dyn Environment>, rng: ChaCha8Rng) -> Self {
        let obs = env.reset();
        Self {
            env,
            obs,
            episode_return: 0.0,
            rng,
        }
    }
}

/// Bootstrap metadata for one contiguous chunk of transitions.
#[derive(Debug, Clone, Copy)]
pub struct ChunkMeta {
    /// Exclusive end index into the flat arrays.
    pub end: usize,
    /// Value estimate of the state following the chunk's last step; zero if
    /// that step terminated its episode.
    pub bootstrap_value: f64,
}

/// One iteration's worth of transitions. Chunks are contiguous per worker;
/// episodes never straddle a chunk boundary reset.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub chosen: Vec<Vec<usize>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub chunks: Vec<ChunkMeta>,
    /// Total returns of episodes that finished inside this batch.
    pub episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn episodes_completed(&self) -> usize {
        self.episode_returns.len()
    }

    /// Concatenates worker batches in order, preserving chunk boundaries.
    pub fn merge(parts: Vec<RolloutBatch>) -> RolloutBatch {
        let mut out = RolloutBatch::default();
        for mut part in parts {
            let offset = out.len();
            out.states.append(&mut part.states);
            out.actions.append(&mut part.actions);
            out.chosen.append(&mut part.chosen);
            out.log_probs.append(&mut part.log_probs);
            out.rewards.append(&mut part.rewards);
            out.values.append(&mut part.values);
            out.dones.append(&mut part.dones);
            out.advantages.append(&mut part.advantages);
            out.returns.append(&mut part.returns);
            out.episode_returns.append(&mut part.episode_returns);
            for chunk in part.chunks {
                out.chunks.push(ChunkMeta {
                    end: offset + chunk.end,
                    bootstrap_value: chunk.bootstrap_value,
                });
            }
        }
        out
    }
}

fn value_of(value_net: &Mlp<f64>, state: &[f64]) -> Result<f64> {
    Ok(value_net.forward(state)?.0[0])
}

/// Collects exactly `steps` transitions from the worker's environment under a
/// fixed head snapshot. Weight snapshots from each sampling step are folded
/// into `tracker` when given; actions are clamped to `[-1, 1]` only at the
/// environment boundary while the stored action and log-probability stay
/// unclamped.
pub fn collect_rollout(
    worker: &mut Worker,
    head: &PolicyHead<f64>,
    value_net: &Mlp<f64>,
    steps: usize,
    mut tracker: Option<&mut WeightTracker<f64>>,
) -> Result<RolloutBatch> {
    let mut batch = RolloutBatch::default();
    for step in 0..steps {
        let state = worker.obs.clone();
        let sample = head.sample(&state, &mut worker.rng)?;
        if let Some(t) = tracker.as_deref_mut() {
            t.track(&sample.weights)?;
        }
        let clamped: Vec<f64> = sample.action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let result = worker.env.step(&clamped).map_err(|e| Error::EnvironmentFault {
            step,
            message: e.to_string(),
        })?;
        let value = value_of(value_net, &state)?;

        worker.episode_return += result.reward;
        batch.states.push(state);
        batch.actions.push(sample.action);
        batch.chosen.push(sample.chosen);
        batch.log_probs.push(sample.log_prob);
        batch.rewards.push(result.reward);
        batch.values.push(value);
        batch.dones.push(result.done);

        if result.done {
            batch.episode_returns.push(worker.episode_return);
            worker.episode_return = 0.0;
            worker.obs = worker.env.reset();
        } else {
            worker.obs = result.obs;
        }
    }
    let bootstrap_value = if *batch.dones.last().unwrap_or(&true) {
        0.0
    } else {
        value_of(value_net, &worker.obs)?
    };
    batch.advantages = vec![0.0; batch.len()];
    batch.returns = vec![0.0; batch.len()];
    batch.chunks.push(ChunkMeta {
        end: batch.len(),
        bootstrap_value,
    });
    Ok(batch)
}
