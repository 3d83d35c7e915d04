//! Action policy heads: the particle-filtering head plus Gaussian, fixed
//! discretization, and GMM baselines behind one interface.

pub mod head;
pub mod optimizer;
pub mod particles;

pub use head::{ActionSample, DimDist, HeadGrads, HeadKind, PolicyHead};
pub use optimizer::HeadOptimizer;
pub use particles::{bin_centers, ParticleSet};
