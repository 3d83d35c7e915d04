//! Particle-based mixture action policies with dynamic resampling.
//!
//! The crate provides a particle policy head whose per-dimension action
//! distribution is a mixture of state-independent Gaussians with
//! state-dependent softmax weights, three baseline heads (Gaussian, uniform
//! discretization, GMM) behind the same interface, dead-particle resampling
//! with a logits correction that preserves the policy distribution, Gumbel-
//! softmax reparameterization with tanh squashing, and an on-policy trainer
//! (PPO / REINFORCE) plus a CLI harness for desk-scale benchmark tasks.
//!
//! The numeric core is generic over the scalar type (f32 or f64) through
//! [`real::Real`]; the trainer and harness run everything at f64 via the
//! aliases below.

pub mod envs;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod policy;
pub mod real;
pub mod reparam;
pub mod resampling;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;

/// f64 instantiations used by the trainer and the CLI.
pub type Matrix64 = numerics::Matrix<f64>;
pub type Mlp64 = numerics::Mlp<f64>;
pub type ParticleSet64 = policy::ParticleSet<f64>;
pub type PolicyHead64 = policy::PolicyHead<f64>;
pub type HeadGrads64 = policy::HeadGrads<f64>;
pub type HeadOptimizer64 = policy::HeadOptimizer<f64>;
