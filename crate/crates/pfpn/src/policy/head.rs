//! Policy heads behind one interface: sample, log-probability, analytic
//! gradients, entropy surrogate, deterministic action.
//!
//! The particle head factorizes across action dimensions; on each dimension
//! the distribution is a mixture of state-independent Gaussian components
//! weighted by a state-dependent softmax. The final affine layer is
//! addressable per (dimension, component) row so resampling can rewrite
//! individual logit rows.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mlp::{Activation, DenseLayer, ForwardCache, Mlp, MlpGrads};
use crate::numerics::softmax::{log_softmax, log_sum_exp};
use crate::numerics::Matrix;
use crate::policy::particles::{bin_centers, ParticleSet};
use crate::real::{real, Real};

/// Which distribution family the head realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Pfpn,
    Gaussian,
    Discrete,
    Gmm,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Pfpn => "pfpn",
            HeadKind::Gaussian => "gaussian",
            HeadKind::Discrete => "discrete",
            HeadKind::Gmm => "gmm",
        }
    }
}

#[derive(Debug, Clone)]
enum Variant<F: Real> {
    Pfpn(ParticleSet<F>),
    Gaussian,
    /// Frozen uniform bin centers, shared by every action dimension.
    Discrete(Vec<F>),
    Gmm,
}

/// One sampled action with everything needed to reproduce its probability.
#[derive(Debug, Clone)]
pub struct ActionSample<F: Real> {
    /// Unclamped action; callers clamp to `[-1, 1]` at the environment
    /// boundary only.
    pub action: Vec<F>,
    /// Chosen component index per dimension.
    pub chosen: Vec<usize>,
    pub log_prob: F,
    /// `n x m` weight snapshot from the sampling pass.
    pub weights: Matrix<F>,
}

/// Gradients shaped like a [`PolicyHead`]; `mu`/`log_xi` are empty for heads
/// without learnable particles.
#[derive(Debug, Clone)]
pub struct HeadGrads<F: Real> {
    pub trunk: MlpGrads<F>,
    pub final_w: Matrix<F>,
    pub final_b: Vec<F>,
    pub mu: Vec<F>,
    pub log_xi: Vec<F>,
}

impl<F: Real> HeadGrads<F> {
    pub fn zeros_like(head: &PolicyHead<F>) -> Self {
        let particle_len = match head.variant {
            Variant::Pfpn(_) => head.n * head.m,
            _ => 0,
        };
        Self {
            trunk: MlpGrads::zeros_like(&head.trunk),
            final_w: Matrix::zeros(head.final_w.rows(), head.final_w.cols()),
            final_b: vec![F::zero(); head.final_b.len()],
            mu: vec![F::zero(); particle_len],
            log_xi: vec![F::zero(); particle_len],
        }
    }

    pub fn scale(&mut self, s: F) {
        self.trunk.scale(s);
        for v in self.final_w.as_mut_slice() {
            *v *= s;
        }
        for v in self
            .final_b
            .iter_mut()
            .chain(self.mu.iter_mut())
            .chain(self.log_xi.iter_mut())
        {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.trunk.add_assign(&other.trunk);
        for (a, b) in self
            .final_w
            .as_mut_slice()
            .iter_mut()
            .zip(other.final_w.as_slice())
        {
            *a += *b;
        }
        for (a, b) in self.final_b.iter_mut().zip(other.final_b.iter()) {
            *a += *b;
        }
        for (a, b) in self.mu.iter_mut().zip(other.mu.iter()) {
            *a += *b;
        }
        for (a, b) in self.log_xi.iter_mut().zip(other.log_xi.iter()) {
            *a += *b;
        }
    }
}

/// Per-dimension mixture view extracted from a forward pass.
#[derive(Debug, Clone)]
pub struct DimDist<F: Real> {
    pub log_w: Vec<F>,
    pub w: Vec<F>,
    /// Component means (bin centers for the discrete head).
    pub mu: Vec<F>,
    /// Component log noise scales; empty for the discrete head.
    pub log_sigma: Vec<F>,
}

impl<F: Real> DimDist<F> {
    /// Log density of the per-dimension mixture at `a` via log-sum-exp of
    /// (log weight + log component density).
    pub fn log_density(&self, a: F) -> F {
        let half_log_2pi = real::<F>(0.5) * (real::<F>(2.0) * F::PI()).ln();
        let terms: Vec<F> = (0..self.mu.len())
            .map(|i| {
                let sigma = self.log_sigma[i].exp();
                let z = (a - self.mu[i]) / sigma;
                self.log_w[i] - real::<F>(0.5) * z * z - self.log_sigma[i] - half_log_2pi
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn categorical_entropy(&self) -> F {
        let mut h = F::zero();
        for (&w, &lw) in self.w.iter().zip(self.log_w.iter()) {
            if w > F::zero() {
                h -= w * lw;
            }
        }
        h
    }
}

pub(crate) struct HeadForward<F: Real> {
    pub features: Vec<F>,
    pub cache: ForwardCache<F>,
    pub dims: Vec<DimDist<F>>,
}

/// A policy head: MLP trunk plus a per-(dimension, component) addressable
/// final affine layer, and variant-specific distribution parameters.
#[derive(Debug, Clone)]
pub struct PolicyHead<F: Real> {
    variant: Variant<F>,
    trunk: Mlp<F>,
    final_w: Matrix<F>,
    final_b: Vec<F>,
    /// Components per action dimension (1 for the Gaussian head).
    n: usize,
    /// Action dimensions.
    m: usize,
}

impl<F: Real> PolicyHead<F> {
    /// Particle head with uniformly initialized particles and zero final
    /// layer, so the initial weights are uniform for every state.
    pub fn pfpn<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        n: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let particles = ParticleSet::init(n, m)?;
        let (trunk, feat) = Self::build_trunk(obs_dim, hidden, rng)?;
        Ok(Self {
            variant: Variant::Pfpn(particles),
            trunk,
            final_w: Matrix::zeros(n * m, feat),
            final_b: vec![F::zero(); n * m],
            n,
            m,
        })
    }

    /// Diagonal Gaussian head with state-dependent mean and log-std outputs.
    pub fn gaussian<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        m: usize,
        init_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("action dims must be >= 1".into()));
        }
        if init_std <= 0.0 {
            return Err(Error::InvalidArgument("init_std must be > 0".into()));
        }
        let (trunk, feat) = Self::build_trunk(obs_dim, hidden, rng)?;
        let mut final_b = vec![F::zero(); 2 * m];
        for b in final_b.iter_mut().skip(m) {
            *b = real::<F>(init_std.ln());
        }
        Ok(Self {
            variant: Variant::Gaussian,
            trunk,
            final_w: Matrix::zeros(2 * m, feat),
            final_b,
            n: 1,
            m,
        })
    }

    /// Fixed uniform discretization with a categorical policy over bin
    /// centers; the atoms equal the particle head's initial locations.
    pub fn discrete<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        n: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("need n >= 1 and m >= 1".into()));
        }
        let (trunk, feat) = Self::build_trunk(obs_dim, hidden, rng)?;
        Ok(Self {
            variant: Variant::Discrete(bin_centers(n)),
            trunk,
            final_w: Matrix::zeros(n * m, feat),
            final_b: vec![F::zero(); n * m],
            n,
            m,
        })
    }

    /// Fully state-dependent Gaussian mixture head. Means start at the bin
    /// centers via output-bias initialization and log-stds at `log(2/n)`, so
    /// the initial distribution matches the particle head's.
    pub fn gmm<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        n: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("need n >= 1 and m >= 1".into()));
        }
        let (trunk, feat) = Self::build_trunk(obs_dim, hidden, rng)?;
        let centers = bin_centers::<F>(n);
        let mut final_b = vec![F::zero(); 3 * n * m];
        let log_gap = real::<F>(2.0 / n as f64).ln();
        for k in 0..m {
            for i in 0..n {
                final_b[n * m + k * n + i] = centers[i];
                final_b[2 * n * m + k * n + i] = log_gap;
            }
        }
        Ok(Self {
            variant: Variant::Gmm,
            trunk,
            final_w: Matrix::zeros(3 * n * m, feat),
            final_b,
            n,
            m,
        })
    }

    fn build_trunk<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<(Mlp<F>, usize)> {
        if obs_dim == 0 || hidden.is_empty() {
            return Err(Error::InvalidArgument(
                "trunk needs obs_dim >= 1 and at least one hidden layer".into(),
            ));
        }
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer::he_init(w[0], w[1], Activation::Relu, rng))
            .collect();
        let feat = *hidden.last().unwrap();
        Ok((Mlp::from_layers(layers)?, feat))
    }

    pub fn kind(&self) -> HeadKind {
        match self.variant {
            Variant::Pfpn(_) => HeadKind::Pfpn,
            Variant::Gaussian => HeadKind::Gaussian,
            Variant::Discrete(_) => HeadKind::Discrete,
            Variant::Gmm => HeadKind::Gmm,
        }
    }

    #[inline]
    pub fn action_dims(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    /// Row of the final layer holding the weight logit for `(dim, comp)`.
    #[inline]
    pub fn logit_row(&self, dim: usize, comp: usize) -> usize {
        debug_assert!(dim < self.m && comp < self.n);
        dim * self.n + comp
    }

    pub fn trunk(&self) -> &Mlp<F> {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp<F> {
        &mut self.trunk
    }

    pub fn final_weight(&self) -> &Matrix<F> {
        &self.final_w
    }

    pub fn final_weight_mut(&mut self) -> &mut Matrix<F> {
        &mut self.final_w
    }

    pub fn final_bias(&self) -> &[F] {
        &self.final_b
    }

    pub fn final_bias_mut(&mut self) -> &mut [F] {
        &mut self.final_b
    }

    pub fn particles(&self) -> Option<&ParticleSet<F>> {
        match &self.variant {
            Variant::Pfpn(p) => Some(p),
            _ => None,
        }
    }

    pub fn particles_mut(&mut self) -> Option<&mut ParticleSet<F>> {
        match &mut self.variant {
            Variant::Pfpn(p) => Some(p),
            _ => None,
        }
    }

    pub(crate) fn forward_dims(&self, state: &[F]) -> Result<HeadForward<F>> {
        let (features, cache) = self.trunk.forward(state)?;
        let mut outputs = self.final_w.matvec(&features)?;
        for (o, b) in outputs.iter_mut().zip(self.final_b.iter()) {
            *o += *b;
        }
        let dims = (0..self.m)
            .map(|k| self.dim_dist(&outputs, k))
            .collect();
        Ok(HeadForward {
            features,
            cache,
            dims,
        })
    }

    fn dim_dist(&self, outputs: &[F], k: usize) -> DimDist<F> {
        let n = self.n;
        match &self.variant {
            Variant::Pfpn(p) => {
                let logits = &outputs[k * n..(k + 1) * n];
                let log_w = log_softmax(logits);
                let w = log_w.iter().map(|l| l.exp()).collect();
                DimDist {
                    log_w,
                    w,
                    mu: (0..n).map(|i| p.mu(i, k)).collect(),
                    log_sigma: (0..n).map(|i| p.log_xi(i, k)).collect(),
                }
            }
            Variant::Discrete(centers) => {
                let logits = &outputs[k * n..(k + 1) * n];
                let log_w = log_softmax(logits);
                let w = log_w.iter().map(|l| l.exp()).collect();
                DimDist {
                    log_w,
                    w,
                    mu: centers.clone(),
                    log_sigma: Vec::new(),
                }
            }
            Variant::Gaussian => DimDist {
                log_w: vec![F::zero()],
                w: vec![F::one()],
                mu: vec![outputs[k]],
                log_sigma: vec![outputs[self.m + k]],
            },
            Variant::Gmm => {
                let logits = &outputs[k * n..(k + 1) * n];
                let log_w = log_softmax(logits);
                let w = log_w.iter().map(|l| l.exp()).collect();
                DimDist {
                    log_w,
                    w,
                    mu: outputs[self.m * n + k * n..self.m * n + (k + 1) * n].to_vec(),
                    log_sigma: outputs[2 * self.m * n + k * n..2 * self.m * n + (k + 1) * n]
                        .to_vec(),
                }
            }
        }
    }

    /// State-dependent weight matrix `w[(i, k)]`; every column sums to one.
    pub fn weights(&self, state: &[F]) -> Result<Matrix<F>> {
        let fwd = self.forward_dims(state)?;
        Ok(Self::weights_from_dims(&fwd.dims, self.n, self.m))
    }

    /// Per-dimension mixture parameters at `state` (weights, component means,
    /// log noise scales).
    pub fn mixture_params(&self, state: &[F]) -> Result<Vec<DimDist<F>>> {
        Ok(self.forward_dims(state)?.dims)
    }

    fn weights_from_dims(dims: &[DimDist<F>], n: usize, m: usize) -> Matrix<F> {
        Matrix::from_fn(n, m, |i, k| dims[k].w[i])
    }

    /// Two-step draw: categorical over components, then the component's
    /// distribution. The action is left unclamped; the stored log-probability
    /// is computed on the unclamped value.
    pub fn sample<R: Rng>(&self, state: &[F], rng: &mut R) -> Result<ActionSample<F>> {
        let fwd = self.forward_dims(state)?;
        let mut action = Vec::with_capacity(self.m);
        let mut chosen = Vec::with_capacity(self.m);
        for dist in &fwd.dims {
            let j = categorical(&dist.w, rng);
            let a = if dist.log_sigma.is_empty() {
                // discrete head emits the bin center exactly
                dist.mu[j]
            } else {
                let eps: F = standard_normal(rng);
                dist.mu[j] + dist.log_sigma[j].exp() * eps
            };
            chosen.push(j);
            action.push(a);
        }
        let log_prob = self.log_prob_from_dims(&fwd.dims, &action);
        Ok(ActionSample {
            action,
            chosen,
            log_prob,
            weights: Self::weights_from_dims(&fwd.dims, self.n, self.m),
        })
    }

    fn log_prob_from_dims(&self, dims: &[DimDist<F>], action: &[F]) -> F {
        let mut total = F::zero();
        for (dist, &a) in dims.iter().zip(action.iter()) {
            if dist.log_sigma.is_empty() {
                let j = nearest_center(&dist.mu, a);
                total += dist.log_w[j];
            } else {
                total += dist.log_density(a);
            }
        }
        total
    }

    /// Log-probability of `action` under the head, factorized across
    /// dimensions. The discrete head returns the chosen bin's categorical
    /// mass (nearest center).
    pub fn log_prob(&self, state: &[F], action: &[F]) -> Result<F> {
        if action.len() != self.m {
            return Err(Error::ShapeMismatch {
                context: "PolicyHead::log_prob action",
                expected: self.m,
                got: action.len(),
            });
        }
        let fwd = self.forward_dims(state)?;
        Ok(self.log_prob_from_dims(&fwd.dims, action))
    }

    /// Mean over dimensions of the categorical entropy (mixture heads) or the
    /// analytic differential entropy (Gaussian head).
    pub fn entropy_surrogate(&self, state: &[F]) -> Result<F> {
        let fwd = self.forward_dims(state)?;
        Ok(self.entropy_from_dims(&fwd.dims))
    }

    fn entropy_from_dims(&self, dims: &[DimDist<F>]) -> F {
        let mut h = F::zero();
        match self.variant {
            Variant::Gaussian => {
                let half_log_2pi_e =
                    real::<F>(0.5) * (real::<F>(2.0) * F::PI() * F::E()).ln();
                for dist in dims {
                    h += half_log_2pi_e + dist.log_sigma[0];
                }
            }
            _ => {
                for dist in dims {
                    h += dist.categorical_entropy();
                }
            }
        }
        h / real::<F>(self.m as f64)
    }

    /// Exploration-free action: the mean (or bin center) of the
    /// argmax-weight component, ties broken toward the lowest index.
    pub fn deterministic_action(&self, state: &[F]) -> Result<Vec<F>> {
        let fwd = self.forward_dims(state)?;
        Ok(fwd
            .dims
            .iter()
            .map(|dist| {
                let mut best = 0;
                for i in 1..dist.w.len() {
                    if dist.w[i] > dist.w[best] {
                        best = i;
                    }
                }
                dist.mu[best]
            })
            .collect())
    }

    /// Analytic gradient of `log pi(action | state)` w.r.t. every parameter
    /// group; also returns the log-probability.
    pub fn grad_log_prob(&self, state: &[F], action: &[F]) -> Result<(F, HeadGrads<F>)> {
        let mut grads = HeadGrads::zeros_like(self);
        let (log_prob, _) =
            self.accumulate_objective_grad(state, action, F::one(), F::zero(), &mut grads)?;
        Ok((log_prob, grads))
    }

    /// Accumulates the gradient of
    /// `logp_coef * log pi(action|state) + ent_coef * entropy_surrogate(state)`
    /// into `grads`; returns `(log_prob, entropy_surrogate)`.
    ///
    /// Component gradients carry the responsibility factor
    /// `w_i p_i / sum_j w_j p_j` and logit gradients its softmax counterpart,
    /// realized by differentiating the log-mixture directly.
    pub fn accumulate_objective_grad(
        &self,
        state: &[F],
        action: &[F],
        logp_coef: F,
        ent_coef: F,
        grads: &mut HeadGrads<F>,
    ) -> Result<(F, F)> {
        if action.len() != self.m {
            return Err(Error::ShapeMismatch {
                context: "PolicyHead::grad action",
                expected: self.m,
                got: action.len(),
            });
        }
        let fwd = self.forward_dims(state)?;
        let n = self.n;
        let m = self.m;
        let mut d_out = vec![F::zero(); self.final_b.len()];
        let mut log_prob = F::zero();
        let entropy = self.entropy_from_dims(&fwd.dims);
        let ent_scale = ent_coef / real::<F>(m as f64);
        let half = real::<F>(0.5);
        let half_log_2pi = half * (real::<F>(2.0) * F::PI()).ln();

        for (k, dist) in fwd.dims.iter().enumerate() {
            let a = action[k];
            match &self.variant {
                Variant::Discrete(_) => {
                    let j = nearest_center(&dist.mu, a);
                    log_prob += dist.log_w[j];
                    let h = dist.categorical_entropy();
                    for i in 0..n {
                        let delta = if i == j { F::one() } else { F::zero() };
                        let mut g = logp_coef * (delta - dist.w[i]);
                        if ent_scale != F::zero() && dist.w[i] > F::zero() {
                            g -= ent_scale * dist.w[i] * (dist.log_w[i] + h);
                        }
                        d_out[k * n + i] = g;
                    }
                }
                Variant::Gaussian => {
                    let sigma = dist.log_sigma[0].exp();
                    let z = (a - dist.mu[0]) / sigma;
                    log_prob += -half * z * z - dist.log_sigma[0] - half_log_2pi;
                    d_out[k] = logp_coef * z / sigma;
                    d_out[m + k] = logp_coef * (z * z - F::one()) + ent_scale;
                }
                Variant::Pfpn(_) | Variant::Gmm => {
                    // responsibilities in log space
                    let mut terms = Vec::with_capacity(n);
                    let mut zs = Vec::with_capacity(n);
                    for i in 0..n {
                        let sigma = dist.log_sigma[i].exp();
                        let z = (a - dist.mu[i]) / sigma;
                        zs.push(z);
                        terms.push(
                            dist.log_w[i] - half * z * z - dist.log_sigma[i] - half_log_2pi,
                        );
                    }
                    let log_mix = log_sum_exp(&terms);
                    log_prob += log_mix;
                    let h = dist.categorical_entropy();
                    let is_gmm = matches!(self.variant, Variant::Gmm);
                    for i in 0..n {
                        let r = (terms[i] - log_mix).exp();
                        let mut g_logit = logp_coef * (r - dist.w[i]);
                        if ent_scale != F::zero() && dist.w[i] > F::zero() {
                            g_logit -= ent_scale * dist.w[i] * (dist.log_w[i] + h);
                        }
                        d_out[k * n + i] = g_logit;
                        if r > F::zero() {
                            let sigma = dist.log_sigma[i].exp();
                            let d_mu = logp_coef * r * zs[i] / sigma;
                            let d_log_sigma = logp_coef * r * (zs[i] * zs[i] - F::one());
                            if is_gmm {
                                d_out[m * n + k * n + i] = d_mu;
                                d_out[2 * m * n + k * n + i] = d_log_sigma;
                            } else {
                                grads.mu[k * n + i] += d_mu;
                                grads.log_xi[k * n + i] += d_log_sigma;
                            }
                        }
                    }
                }
            }
        }

        // final affine layer, then the trunk
        grads.final_w.add_outer(&d_out, &fwd.features)?;
        for (gb, d) in grads.final_b.iter_mut().zip(d_out.iter()) {
            *gb += *d;
        }
        let d_feat = self.final_w.matvec_transposed(&d_out)?;
        let (trunk_grads, _) = self.trunk.backward(&fwd.cache, &d_feat)?;
        grads.trunk.add_assign(&trunk_grads);
        Ok((log_prob, entropy))
    }
}

/// Index of the center closest to `a`; ties go to the lower index.
pub(crate) fn nearest_center<F: Real>(centers: &[F], a: F) -> usize {
    let mut best = 0;
    let mut best_d = (a - centers[0]).abs();
    for (i, &c) in centers.iter().enumerate().skip(1) {
        let d = (a - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

pub(crate) fn categorical<F: Real, R: Rng>(w: &[F], rng: &mut R) -> usize {
    let u = real::<F>(rng.random::<f64>());
    let mut acc = F::zero();
    for (i, &wi) in w.iter().enumerate() {
        acc += wi;
        if u < acc {
            return i;
        }
    }
    w.len() - 1
}

pub(crate) fn standard_normal<F: Real, R: Rng>(rng: &mut R) -> F {
    real::<F>(rng.sample::<f64, _>(StandardNormal))
}
