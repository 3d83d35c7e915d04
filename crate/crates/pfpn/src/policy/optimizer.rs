//! Adam over all parameter groups of a policy head.

use crate::error::Result;
use crate::numerics::adam::{adam_step, AdamBuf, AdamConfig, AdamState};
use crate::policy::head::{HeadGrads, PolicyHead};
use crate::real::Real;

/// Moment buffers for trunk, final layer, and particle parameters. The final
/// layer buffers are row-addressable so resampling can zero the moments of
/// overwritten rows.
#[derive(Debug, Clone)]
pub struct HeadOptimizer<F: Real> {
    trunk: AdamState<F>,
    final_w: AdamBuf<F>,
    final_b: AdamBuf<F>,
    mu: AdamBuf<F>,
    log_xi: AdamBuf<F>,
    step: u64,
    cfg: AdamConfig,
}

impl<F: Real> HeadOptimizer<F> {
    pub fn new(head: &PolicyHead<F>, cfg: AdamConfig) -> Self {
        let particle_len = head.particles().map_or(0, |p| p.mu_flat().len());
        Self {
            trunk: AdamState::new(head.trunk(), cfg),
            final_w: AdamBuf::new(head.final_weight().as_slice().len()),
            final_b: AdamBuf::new(head.final_bias().len()),
            mu: AdamBuf::new(particle_len),
            log_xi: AdamBuf::new(particle_len),
            step: 0,
            cfg,
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// One Adam step over every head parameter group.
    pub fn apply(&mut self, head: &mut PolicyHead<F>, grads: &HeadGrads<F>) -> Result<()> {
        adam_step(&mut self.trunk, head.trunk_mut(), &grads.trunk)?;
        self.step += 1;
        let t = self.step;
        let cfg = self.cfg;
        self.final_w.step(
            &cfg,
            t,
            head.final_weight_mut().as_mut_slice(),
            grads.final_w.as_slice(),
            "head.final.weight",
        )?;
        self.final_b.step(
            &cfg,
            t,
            head.final_bias_mut(),
            &grads.final_b,
            "head.final.bias",
        )?;
        if let Some(p) = head.particles_mut() {
            self.mu
                .step(&cfg, t, p.mu_flat_mut(), &grads.mu, "head.particles.mu")?;
            self.log_xi.step(
                &cfg,
                t,
                p.log_xi_flat_mut(),
                &grads.log_xi,
                "head.particles.log_xi",
            )?;
        }
        Ok(())
    }

    /// Clears the moments of every parameter owned by `(dim, comp)`: the
    /// final-layer logit row and bias plus the particle entries.
    pub fn reset_component(&mut self, head: &PolicyHead<F>, dim: usize, comp: usize) {
        let row = head.logit_row(dim, comp);
        let cols = head.final_weight().cols();
        self.final_w.reset_range(row * cols..(row + 1) * cols);
        self.final_b.reset_range(row..row + 1);
        if !self.mu.is_empty() {
            let idx = dim * head.components() + comp;
            self.mu.reset_range(idx..idx + 1);
            self.log_xi.reset_range(idx..idx + 1);
        }
    }
}
