//! On-policy optimization: rollout collection, GAE, PPO / REINFORCE updates,
//! the resampling loop, evaluation, and the policy-gradient variance probe.

pub mod gae;
pub mod ppo;
pub mod reinforce;
pub mod rollout;
pub mod variance;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::numerics::adam::{AdamConfig, AdamState};
use crate::numerics::Mlp;
use crate::policy::{HeadKind, HeadOptimizer, PolicyHead};
use crate::resampling::{
    detect_dead, draw_targets, resample, IntervalUnit, ResampleConfig, ResampleEvent,
    WeightTracker,
};

pub use gae::{compute_gae, normalize_advantages};
pub use ppo::{clipped_objective, ppo_update};
pub use reinforce::reinforce_update;
pub use rollout::{collect_rollout, ChunkMeta, RolloutBatch, Worker};
pub use variance::{variance_probe, VarianceProbeReport, VarianceRow};

/// Which update rule drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Ppo,
    /// Full-batch policy gradient with a batch-mean baseline (bandit mode).
    Reinforce,
}

/// Trainer hyperparameters. Defaults: gamma 0.95, GAE lambda 0.95, clip 0.2,
/// lr 1e-4, with standard PPO choices for the epoch/minibatch structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub samples_per_iteration: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_iterations: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            gamma: 0.95,
            gae_lambda: 0.95,
            clip_range: 0.2,
            lr: 1e-4,
            epochs: 3,
            minibatch_size: 256,
            samples_per_iteration: 4096,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_iterations: 100,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.gamma) || !in_unit(self.gae_lambda) {
            return Err(Error::Config(
                "trainer.gamma and trainer.gae_lambda must lie in (0, 1]".into(),
            ));
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return Err(Error::Config("trainer.clip_range must lie in (0, 1)".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("trainer.lr must be > 0".into()));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.samples_per_iteration == 0 {
            return Err(Error::Config(
                "trainer epoch/minibatch/sample counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluation cadence: `episodes` deterministic rollouts every `every`
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub every: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 10,
            every: 1,
        }
    }
}

/// Loss and diagnostic summary of one update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub entropy: f64,
}

/// One particle's state for the evolution log.
#[derive(Debug, Clone)]
pub struct ParticleRow {
    pub dim: usize,
    pub particle: usize,
    pub mu: f64,
    pub xi: f64,
    pub mean_weight: f64,
}

/// Everything the harness needs to log one iteration.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: usize,
    pub env_steps: u64,
    pub mean_train_reward: f64,
    pub mean_eval_reward: f64,
    pub stats: UpdateStats,
    pub dead_particle_count: usize,
    pub events: Vec<ResampleEvent>,
    pub particles: Vec<ParticleRow>,
}

/// Runs `episodes` rollouts with deterministic actions; returns the mean
/// return and the per-episode returns.
pub fn evaluate(
    env: &mut dyn Environment,
    head: &PolicyHead<f64>,
    episodes: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let action = head.deterministic_action(&obs)?;
            let clamped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let step = env.step(&clamped)?;
            total += step.reward;
            if step.done {
                break;
            }
            obs = step.obs;
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / episodes.max(1) as f64;
    Ok((mean, returns))
}

/// The full training loop: collect, estimate advantages, update, and
/// periodically detect dead particles and resample. Single-worker runs are
/// bit-deterministic in the seed.
pub struct Trainer {
    head: PolicyHead<f64>,
    value: Mlp<f64>,
    head_opt: HeadOptimizer<f64>,
    value_opt: AdamState<f64>,
    workers: Vec<Worker>,
    eval_env: Box<dyn Environment>,
    cfg: TrainerConfig,
    resample_cfg: ResampleConfig,
    eval_cfg: EvalConfig,
    window_tracker: Option<WeightTracker<f64>>,
    since_resample: u64,
    env_steps: u64,
    last_eval: f64,
    update_rng: ChaCha8Rng,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        head: PolicyHead<f64>,
        value: Mlp<f64>,
        envs: Vec<Box<dyn Environment>>,
        eval_env: Box<dyn Environment>,
        cfg: TrainerConfig,
        resample_cfg: ResampleConfig,
        eval_cfg: EvalConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if envs.is_empty() {
            return Err(Error::Config("trainer needs at least one worker env".into()));
        }
        if head.kind() == HeadKind::Pfpn && resample_cfg.enabled {
            resample_cfg.validate(head.components())?;
        }
        let workers = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(10 + i as u64);
                Worker::new(env, rng)
            })
            .collect();
        let window_tracker = (head.kind() == HeadKind::Pfpn)
            .then(|| WeightTracker::new(head.components(), head.action_dims()));
        let mut update_rng = ChaCha8Rng::seed_from_u64(seed);
        update_rng.set_stream(1);
        let head_opt = HeadOptimizer::new(&head, AdamConfig::with_lr(cfg.lr));
        let value_opt = AdamState::new(&value, AdamConfig::with_lr(cfg.lr));
        Ok(Self {
            head,
            value,
            head_opt,
            value_opt,
            workers,
            eval_env,
            cfg,
            resample_cfg,
            eval_cfg,
            window_tracker,
            since_resample: 0,
            env_steps: 0,
            last_eval: f64::NAN,
            update_rng,
        })
    }

    pub fn head(&self) -> &PolicyHead<f64> {
        &self.head
    }

    pub fn value_net(&self) -> &Mlp<f64> {
        &self.value
    }

    /// Runs `max_iterations` iterations, handing each [`IterationReport`] to
    /// the sink. Any sub-operation error aborts the loop and propagates after
    /// the caller has had a chance to checkpoint via [`Trainer::head`].
    pub fn run(&mut self, mut sink: impl FnMut(IterationReport) -> Result<()>) -> Result<()> {
        for iteration in 1..=self.cfg.max_iterations {
            let report = self.run_iteration(iteration)?;
            sink(report)?;
        }
        Ok(())
    }

    fn run_iteration(&mut self, iteration: usize) -> Result<IterationReport> {
        let batch = self.collect_iteration()?;
        self.env_steps += batch.len() as u64;
        let episodes = batch.episodes_completed();
        let mean_train_reward = if episodes > 0 {
            batch.episode_returns.iter().sum::<f64>() / episodes as f64
        } else {
            f64::NAN
        };

        let mut batch = batch;
        let stats = match self.cfg.algorithm {
            Algorithm::Ppo => {
                compute_gae(&mut batch, self.cfg.gamma, self.cfg.gae_lambda);
                normalize_advantages(&mut batch);
                ppo_update(
                    &batch,
                    &mut self.head,
                    &mut self.head_opt,
                    &mut self.value,
                    &mut self.value_opt,
                    &self.cfg,
                    &mut self.update_rng,
                )?
            }
            Algorithm::Reinforce => {
                reinforce_update(&batch, &mut self.head, &mut self.head_opt)?
            }
        };

        self.since_resample += match self.resample_cfg.interval_unit {
            IntervalUnit::Episodes => episodes as u64,
            IntervalUnit::Steps => batch.len() as u64,
        };

        let particles = self.particle_rows();
        let (dead_particle_count, events) = self.maybe_resample()?;

        let mean_eval_reward = if self.eval_cfg.every > 0
            && iteration.is_multiple_of(self.eval_cfg.every)
            && self.eval_cfg.episodes > 0
        {
            let (mean, _) = evaluate(self.eval_env.as_mut(), &self.head, self.eval_cfg.episodes)?;
            self.last_eval = mean;
            mean
        } else {
            self.last_eval
        };

        Ok(IterationReport {
            iteration,
            env_steps: self.env_steps,
            mean_train_reward,
            mean_eval_reward,
            stats,
            dead_particle_count,
            events,
            particles,
        })
    }

    /// Fan-out rollout collection across workers; single worker stays on the
    /// calling thread.
    fn collect_iteration(&mut self) -> Result<RolloutBatch> {
        let total = self.cfg.samples_per_iteration;
        let k = self.workers.len();
        let base = total / k;
        let remainder = total % k;
        let head = &self.head;
        let value = &self.value;
        let track = self.window_tracker.is_some();
        let (n, m) = (head.components(), head.action_dims());

        let results: Vec<(RolloutBatch, Option<WeightTracker<f64>>)> = if k == 1 {
            let steps = total;
            let mut tracker = track.then(|| WeightTracker::new(n, m));
            let batch =
                collect_rollout(&mut self.workers[0], head, value, steps, tracker.as_mut())?;
            vec![(batch, tracker)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .enumerate()
                    .map(|(i, worker)| {
                        let steps = base + usize::from(i < remainder);
                        scope.spawn(move || {
                            let mut tracker = track.then(|| WeightTracker::new(n, m));
                            let batch =
                                collect_rollout(worker, head, value, steps, tracker.as_mut())?;
                            Ok::<_, Error>((batch, tracker))
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("rollout worker panicked"))
                    .collect::<Result<Vec<_>>>()
            })?
        };

        let mut batches = Vec::with_capacity(results.len());
        for (batch, tracker) in results {
            if let (Some(window), Some(local)) = (self.window_tracker.as_mut(), tracker.as_ref())
            {
                window.merge(local)?;
            }
            batches.push(batch);
        }
        Ok(RolloutBatch::merge(batches))
    }

    fn particle_rows(&self) -> Vec<ParticleRow> {
        let Some(particles) = self.head.particles() else {
            return Vec::new();
        };
        let tracker = self.window_tracker.as_ref();
        let mut rows = Vec::with_capacity(particles.dims() * particles.particles_per_dim());
        for dim in 0..particles.dims() {
            for particle in 0..particles.particles_per_dim() {
                rows.push(ParticleRow {
                    dim,
                    particle,
                    mu: particles.mu(particle, dim),
                    xi: particles.xi(particle, dim),
                    mean_weight: tracker.map_or(f64::NAN, |t| t.mean_weight(particle, dim)),
                });
            }
        }
        rows
    }

    /// Dead-particle detection and resampling at the iteration barrier, once
    /// the interval has elapsed. The tracking window resets afterwards.
    fn maybe_resample(&mut self) -> Result<(usize, Vec<ResampleEvent>)> {
        if !self.resample_cfg.enabled || self.since_resample < self.resample_cfg.interval {
            return Ok((0, Vec::new()));
        }
        let Some(tracker) = self.window_tracker.as_mut() else {
            return Ok((0, Vec::new()));
        };
        if tracker.count() == 0 {
            return Ok((0, Vec::new()));
        }
        let dead = detect_dead(tracker, self.resample_cfg.epsilon)?;
        let mut events = Vec::new();
        if !dead.is_empty() {
            let assignment =
                draw_targets(&dead, tracker, self.resample_cfg.strategy, &mut self.update_rng)?;
            events = resample(
                &mut self.head,
                &assignment,
                self.resample_cfg.noise_scale,
                &mut self.update_rng,
                Some(&mut self.head_opt),
            )?;
        }
        tracker.clear();
        self.since_resample = 0;
        Ok((dead.len(), events))
    }
}
