//! Dense linear algebra, a small MLP with analytic forward/backward passes,
//! stable softmax/log-sum-exp, Adam, and quadrature utilities.
//!
//! Everything here is a deterministic function of its inputs and mutates only
//! caller-owned state, so disjoint data can be driven from multiple workers.

pub mod adam;
pub mod matrix;
pub mod mlp;
pub mod quadrature;
pub mod softmax;

pub use adam::{adam_step, AdamBuf, AdamConfig, AdamState};
pub use matrix::Matrix;
pub use mlp::{Activation, DenseLayer, ForwardCache, LayerGrads, Mlp, MlpGrads};
pub use softmax::{log_softmax, log_sum_exp, softmax, softplus};
