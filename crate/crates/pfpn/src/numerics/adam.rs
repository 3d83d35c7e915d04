//! Adam optimizer over flat parameter groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mlp::{Mlp, MlpGrads};
use crate::real::{real, Real};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second-moment accumulators for one flat parameter group.
#[derive(Debug, Clone)]
pub struct AdamBuf<F: Real> {
    m: Vec<F>,
    v: Vec<F>,
}

impl<F: Real> AdamBuf<F> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Zeroes the moment entries in `range` (used when parameter rows are
    /// overwritten by resampling).
    pub fn reset_range(&mut self, range: std::ops::Range<usize>) {
        for i in range {
            self.m[i] = F::zero();
            self.v[i] = F::zero();
        }
    }

    /// One bias-corrected Adam update at step `t` (t starts at 1).
    pub fn step(
        &mut self,
        cfg: &AdamConfig,
        t: u64,
        params: &mut [F],
        grads: &[F],
        group: &str,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                context: "AdamBuf::step",
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                group: group.to_string(),
                index,
            });
        }
        let b1 = real::<F>(cfg.beta1);
        let b2 = real::<F>(cfg.beta2);
        let lr = real::<F>(cfg.lr);
        let eps = real::<F>(cfg.epsilon);
        let bc1 = F::one() - real::<F>(cfg.beta1.powi(t as i32));
        let bc2 = F::one() - real::<F>(cfg.beta2.powi(t as i32));
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Adam state shaped like an [`Mlp`] plus a step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F: Real> {
    weights: Vec<AdamBuf<F>>,
    biases: Vec<AdamBuf<F>>,
    step: u64,
    pub cfg: AdamConfig,
}

impl<F: Real> AdamState<F> {
    pub fn new(mlp: &Mlp<F>, cfg: AdamConfig) -> Self {
        let weights = mlp
            .layers()
            .iter()
            .map(|l| AdamBuf::new(l.weight.as_slice().len()))
            .collect();
        let biases = mlp
            .layers()
            .iter()
            .map(|l| AdamBuf::new(l.bias.len()))
            .collect();
        Self {
            weights,
            biases,
            step: 0,
            cfg,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Standard Adam update with bias correction; increments the step counter.
pub fn adam_step<F: Real>(
    state: &mut AdamState<F>,
    params: &mut Mlp<F>,
    grads: &MlpGrads<F>,
) -> Result<()> {
    if grads.layers.len() != params.layers().len() {
        return Err(Error::ShapeMismatch {
            context: "adam_step layers",
            expected: params.layers().len(),
            got: grads.layers.len(),
        });
    }
    state.step += 1;
    let t = state.step;
    let cfg = state.cfg;
    for (i, layer) in params.layers_mut().iter_mut().enumerate() {
        state.weights[i].step(
            &cfg,
            t,
            layer.weight.as_mut_slice(),
            grads.layers[i].weight.as_slice(),
            &format!("mlp.layer{i}.weight"),
        )?;
        state.biases[i].step(
            &cfg,
            t,
            &mut layer.bias,
            &grads.layers[i].bias,
            &format!("mlp.layer{i}.bias"),
        )?;
    }
    Ok(())
}
