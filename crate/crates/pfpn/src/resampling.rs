//! Dead-particle detection and resampling.
//!
//! Particles whose tracked maximum weight falls below a threshold stop
//! receiving gradient and are reactivated by duplicating an alive target
//! particle. The final-layer logits of the affected rows are corrected by
//! `-log(|D| + 1)` so the policy distribution is unchanged up to the dead
//! particles' residual weight mass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::policy::head::{categorical, PolicyHead};
use crate::policy::optimizer::HeadOptimizer;
use crate::real::{real, to_f64, Real};

/// Running per-particle weight statistics over the current resampling window.
#[derive(Debug, Clone)]
pub struct WeightTracker<F: Real> {
    n: usize,
    m: usize,
    /// Dimension-major `(k * n + i)` running maxima.
    max: Vec<F>,
    sum: Vec<F>,
    count: u64,
}

impl<F: Real> WeightTracker<F> {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            max: vec![F::zero(); n * m],
            sum: vec![F::zero(); n * m],
            count: 0,
        }
    }

    /// Folds one `n x m` weight snapshot from the sampling path into the
    /// running maximum and mean.
    pub fn track(&mut self, snapshot: &Matrix<F>) -> Result<()> {
        if snapshot.rows() != self.n || snapshot.cols() != self.m {
            return Err(Error::ShapeMismatch {
                context: "WeightTracker::track",
                expected: self.n * self.m,
                got: snapshot.rows() * snapshot.cols(),
            });
        }
        for k in 0..self.m {
            for i in 0..self.n {
                let w = snapshot.get(i, k);
                let idx = k * self.n + i;
                if w > self.max[idx] {
                    self.max[idx] = w;
                }
                self.sum[idx] += w;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max_weight(&self, particle: usize, dim: usize) -> F {
        self.max[dim * self.n + particle]
    }

    pub fn mean_weight(&self, particle: usize, dim: usize) -> F {
        if self.count == 0 {
            F::zero()
        } else {
            self.sum[dim * self.n + particle] / real::<F>(self.count as f64)
        }
    }

    /// Clears the window (`W_i` reset after every resampling event).
    pub fn clear(&mut self) {
        self.max.fill(F::zero());
        self.sum.fill(F::zero());
        self.count = 0;
    }

    /// Folds another tracker's window into this one (worker fan-in).
    pub fn merge(&mut self, other: &WeightTracker<F>) -> Result<()> {
        if other.n != self.n || other.m != self.m {
            return Err(Error::ShapeMismatch {
                context: "WeightTracker::merge",
                expected: self.n * self.m,
                got: other.n * other.m,
            });
        }
        for i in 0..self.max.len() {
            if other.max[i] > self.max[i] {
                self.max[i] = other.max[i];
            }
            self.sum[i] += other.sum[i];
        }
        self.count += other.count;
        Ok(())
    }

    pub fn particles_per_dim(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.m
    }
}

/// Identifier of one particle on one action dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParticleId {
    pub dim: usize,
    pub particle: usize,
}

/// A particle is dead when its maximum observed weight over the window stays
/// below `epsilon`. Errors if the tracker has seen no snapshots.
pub fn detect_dead<F: Real>(tracker: &WeightTracker<F>, epsilon: f64) -> Result<Vec<ParticleId>> {
    if tracker.count() == 0 {
        return Err(Error::EmptyTracker);
    }
    let eps = real::<F>(epsilon);
    let mut dead = Vec::new();
    for dim in 0..tracker.dims() {
        for particle in 0..tracker.particles_per_dim() {
            if tracker.max_weight(particle, dim) < eps {
                dead.push(ParticleId { dim, particle });
            }
        }
    }
    Ok(dead)
}

/// How targets are drawn for dead particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResampleStrategy {
    /// Draw from the categorical distribution over alive particles' mean
    /// weights (the default; lower variance).
    #[default]
    Weighted,
    /// Draw uniformly from all alive particles.
    Unweighted,
}

/// Dead-to-target mapping, grouped per (dimension, target).
#[derive(Debug, Clone, Default)]
pub struct ResampleAssignment {
    pub groups: Vec<TargetGroup>,
}

#[derive(Debug, Clone)]
pub struct TargetGroup {
    pub dim: usize,
    pub target: usize,
    pub dead: Vec<usize>,
}

impl ResampleAssignment {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dead_count(&self) -> usize {
        self.groups.iter().map(|g| g.dead.len()).sum()
    }
}

/// Draws one alive target per dead particle, independently, within the same
/// dimension. Targets are always alive under both strategies.
pub fn draw_targets<F: Real, R: Rng>(
    dead: &[ParticleId],
    tracker: &WeightTracker<F>,
    strategy: ResampleStrategy,
    rng: &mut R,
) -> Result<ResampleAssignment> {
    let n = tracker.particles_per_dim();
    let mut assignment = ResampleAssignment::default();
    let mut dims: Vec<usize> = dead.iter().map(|p| p.dim).collect();
    dims.sort_unstable();
    dims.dedup();

    for dim in dims {
        let dead_here: Vec<usize> = dead
            .iter()
            .filter(|p| p.dim == dim)
            .map(|p| p.particle)
            .collect();
        let alive: Vec<usize> = (0..n).filter(|i| !dead_here.contains(i)).collect();
        if alive.is_empty() {
            return Err(Error::AllParticlesDead { dim });
        }

        let probs: Vec<F> = match strategy {
            ResampleStrategy::Unweighted => {
                vec![F::one() / real::<F>(alive.len() as f64); alive.len()]
            }
            ResampleStrategy::Weighted => {
                let means: Vec<F> = alive
                    .iter()
                    .map(|&i| tracker.mean_weight(i, dim))
                    .collect();
                let total = means.iter().fold(F::zero(), |a, &b| a + b);
                if total > F::zero() {
                    means.iter().map(|&w| w / total).collect()
                } else {
                    vec![F::one() / real::<F>(alive.len() as f64); alive.len()]
                }
            }
        };

        let mut per_target: Vec<(usize, Vec<usize>)> = Vec::new();
        for &d in &dead_here {
            let target = alive[categorical(&probs, rng)];
            match per_target.iter_mut().find(|(t, _)| *t == target) {
                Some((_, list)) => list.push(d),
                None => per_target.push((target, vec![d])),
            }
        }
        per_target.sort_by_key(|(t, _)| *t);
        for (target, dead_list) in per_target {
            assignment.groups.push(TargetGroup {
                dim,
                target,
                dead: dead_list,
            });
        }
    }
    Ok(assignment)
}

/// One audit-log row produced by [`resample`].
#[derive(Debug, Clone)]
pub struct ResampleEvent {
    pub dim: usize,
    pub dead: usize,
    pub target: usize,
    pub old_bias: f64,
    pub new_bias: f64,
}

/// Duplicates each target particle onto its dead set and applies the logits
/// correction `b_i, b_tau <- b_tau - log(|D_tau| + 1)`; final-layer rows of
/// dead particles are overwritten with the target's row, locations are
/// jittered by `+-noise_scale * (2/n)`, and Adam moments of overwritten rows
/// are reset. Untouched rows are left bit-identical.
pub fn resample<F: Real, R: Rng>(
    head: &mut PolicyHead<F>,
    assignment: &ResampleAssignment,
    noise_scale: f64,
    rng: &mut R,
    mut optimizer: Option<&mut HeadOptimizer<F>>,
) -> Result<Vec<ResampleEvent>> {
    if head.particles().is_none() {
        return Err(Error::NotAParticleHead(head.kind().name()));
    }
    let mut events = Vec::with_capacity(assignment.dead_count());
    for group in &assignment.groups {
        if group.dead.contains(&group.target) {
            return Err(Error::DeadTarget {
                dim: group.dim,
                target: group.target,
            });
        }
        let correction = real::<F>((group.dead.len() as f64 + 1.0).ln());
        let target_row = head.logit_row(group.dim, group.target);
        let old_bias = head.final_bias()[target_row];
        let new_bias = old_bias - correction;

        for &dead in &group.dead {
            head.particles_mut()
                .expect("checked particle head")
                .duplicate(group.dim, group.target, dead, noise_scale, rng);
            let dead_row = head.logit_row(group.dim, dead);
            let target_weights = head.final_weight().row(target_row).to_vec();
            head.final_weight_mut()
                .row_mut(dead_row)
                .copy_from_slice(&target_weights);
            head.final_bias_mut()[dead_row] = new_bias;
            if let Some(opt) = optimizer.as_deref_mut() {
                opt.reset_component(head, group.dim, dead);
            }
            events.push(ResampleEvent {
                dim: group.dim,
                dead,
                target: group.target,
                old_bias: to_f64(old_bias),
                new_bias: to_f64(new_bias),
            });
        }
        head.final_bias_mut()[target_row] = new_bias;
    }
    Ok(events)
}

/// Resampling hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResampleConfig {
    /// Dead-particle detection threshold.
    pub epsilon: f64,
    /// Interval between resampling events, in `interval_unit`s.
    pub interval: u64,
    pub interval_unit: IntervalUnit,
    pub strategy: ResampleStrategy,
    /// Duplication jitter as a fraction of the initial inter-particle gap.
    pub noise_scale: f64,
    /// Switch for the no-resampling ablation.
    pub enabled: bool,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0015,
            interval: 20,
            interval_unit: IntervalUnit::Episodes,
            strategy: ResampleStrategy::Weighted,
            noise_scale: 0.05,
            enabled: true,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 / n as f64) {
            return Err(Error::Config(format!(
                "resample.epsilon must lie in (0, 1/n) = (0, {}), got {}",
                1.0 / n as f64,
                self.epsilon
            )));
        }
        if self.interval == 0 {
            return Err(Error::Config("resample.interval must be >= 1".into()));
        }
        if self.noise_scale < 0.0 {
            return Err(Error::Config("resample.noise_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Unit for the resampling interval: environment episodes (the default) or
/// raw environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntervalUnit {
    #[default]
    Episodes,
    Steps,
}
