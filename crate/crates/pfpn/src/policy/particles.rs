//! State-independent particle set: the adaptive discretization of the action
//! space. Each particle is a Gaussian component `N(mu, xi^2)` on one action
//! dimension; the noise scale is stored in log form so gradient steps keep it
//! positive.

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::{real, Real};

/// Per-(dimension, particle) location and log noise scale.
///
/// Storage is dimension-major: entry `(i, k)` for particle `i` on action
/// dimension `k` lives at flat index `k * n + i`, matching the row layout of
/// the policy head's final layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<F: Real> {
    n: usize,
    m: usize,
    mu: Vec<F>,
    log_xi: Vec<F>,
}

/// Uniform bin centers of `[-1, 1]`: the k-th of n centers is `-1 + (2k-1)/n`
/// (1-based), all with width `2/n`.
pub fn bin_centers<F: Real>(n: usize) -> Vec<F> {
    (0..n)
        .map(|i| real::<F>(-1.0 + (2.0 * i as f64 + 1.0) / n as f64))
        .collect()
}

impl<F: Real> ParticleSet<F> {
    /// Uniform initialization: locations at bin centers of `[-1, 1]`, noise
    /// scale equal to the inter-particle gap `2/n`.
    pub fn init(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "particle set needs n >= 1 and m >= 1, got n={n}, m={m}"
            )));
        }
        let centers = bin_centers::<F>(n);
        let gap = real::<F>(2.0 / n as f64);
        let mut mu = Vec::with_capacity(n * m);
        let mut log_xi = Vec::with_capacity(n * m);
        for _ in 0..m {
            mu.extend_from_slice(&centers);
            log_xi.extend(std::iter::repeat_n(gap.ln(), n));
        }
        Ok(Self { n, m, mu, log_xi })
    }

    #[inline]
    pub fn particles_per_dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, particle: usize, dim: usize) -> usize {
        debug_assert!(particle < self.n && dim < self.m);
        dim * self.n + particle
    }

    #[inline]
    pub fn mu(&self, particle: usize, dim: usize) -> F {
        self.mu[self.idx(particle, dim)]
    }

    #[inline]
    pub fn log_xi(&self, particle: usize, dim: usize) -> F {
        self.log_xi[self.idx(particle, dim)]
    }

    #[inline]
    pub fn xi(&self, particle: usize, dim: usize) -> F {
        self.log_xi(particle, dim).exp()
    }

    pub fn set_mu(&mut self, particle: usize, dim: usize, value: F) {
        let i = self.idx(particle, dim);
        self.mu[i] = value;
    }

    pub fn set_log_xi(&mut self, particle: usize, dim: usize, value: F) {
        let i = self.idx(particle, dim);
        self.log_xi[i] = value;
    }

    /// Copies `(mu, log_xi)` from `src` onto `dst` within dimension `dim`,
    /// then jitters the copied location by a uniform draw in
    /// `±noise_scale * (2/n)`.
    pub fn duplicate<R: Rng>(
        &mut self,
        dim: usize,
        src: usize,
        dst: usize,
        noise_scale: f64,
        rng: &mut R,
    ) {
        let mu = self.mu(src, dim);
        let log_xi = self.log_xi(src, dim);
        let jitter = if noise_scale > 0.0 {
            let span = noise_scale * 2.0 / self.n as f64;
            real::<F>(rng.random_range(-span..=span))
        } else {
            F::zero()
        };
        self.set_mu(dst, dim, mu + jitter);
        self.set_log_xi(dst, dim, log_xi);
    }

    /// Flat dimension-major views, used by the optimizer and checkpoints.
    pub fn mu_flat(&self) -> &[F] {
        &self.mu
    }

    pub fn log_xi_flat(&self) -> &[F] {
        &self.log_xi
    }

    pub fn mu_flat_mut(&mut self) -> &mut [F] {
        &mut self.mu
    }

    pub fn log_xi_flat_mut(&mut self) -> &mut [F] {
        &mut self.log_xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_particles_sit_at_half_points() {
        let p = ParticleSet::<f64>::init(2, 1).unwrap();
        assert_eq!(p.mu(0, 0), -0.5);
        assert_eq!(p.mu(1, 0), 0.5);
        assert!((p.xi(0, 0) - 1.0).abs() < 1e-15);
        assert!((p.xi(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn four_particles_quarter_grid() {
        let p = ParticleSet::<f64>::init(4, 2).unwrap();
        let expect = [-0.75, -0.25, 0.25, 0.75];
        for dim in 0..2 {
            for (i, e) in expect.iter().enumerate() {
                assert!((p.mu(i, dim) - e).abs() < 1e-15);
                assert!((p.xi(i, dim) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn thirty_five_particle_gap() {
        // 35 particles per action dimension
        let p = ParticleSet::<f64>::init(35, 1).unwrap();
        let gap = 2.0 / 35.0;
        for i in 0..35 {
            let expect = -1.0 + (2.0 * i as f64 + 1.0) / 35.0;
            assert!((p.mu(i, 0) - expect).abs() < 1e-15);
            assert!((p.xi(i, 0) - gap).abs() < 1e-15);
        }
        assert!((p.xi(0, 0) - 0.05714285714285714).abs() < 1e-15);
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(ParticleSet::<f64>::init(0, 1).is_err());
        assert!(ParticleSet::<f64>::init(3, 0).is_err());
    }
}
