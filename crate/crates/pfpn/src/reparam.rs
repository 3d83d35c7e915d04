//! Reparameterized sampling: concrete (Gumbel-softmax) relaxation of the
//! particle choice, straight-through action construction, and the tanh-
//! squashed mixture log-density used by action-value-based optimization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::softmax::{log_softmax, softplus};
use crate::numerics::Matrix;
use crate::policy::head::{HeadGrads, PolicyHead};
use crate::real::{real, Real};

/// One draw from the concrete distribution: relaxed one-hot coordinates that
/// are differentiable in the logits for fixed Gumbel noise.
#[derive(Debug, Clone)]
pub struct ConcreteSample<F: Real> {
    /// Relaxed one-hot coordinates; positive, sum to one.
    pub x: Vec<F>,
    /// Gumbel noises consumed by the draw.
    pub gumbels: Vec<F>,
    /// Temperature; 1 by default.
    pub lambda: F,
}

impl<F: Real> ConcreteSample<F> {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.x.len() {
            if self.x[i] > self.x[best] {
                best = i;
            }
        }
        best
    }

    /// Jacobian `d x_i / d logit_j = x_i (delta_ij - x_j) / lambda` for the
    /// fixed noise stored in the sample.
    pub fn jacobian_logits(&self) -> Matrix<F> {
        let n = self.x.len();
        Matrix::from_fn(n, n, |i, j| {
            let delta = if i == j { F::one() } else { F::zero() };
            self.x[i] * (delta - self.x[j]) / self.lambda
        })
    }
}

/// Draws standard Gumbel noise `-log(-log(U))`.
pub fn gumbel_noise<F: Real, R: Rng>(n: usize, rng: &mut R) -> Vec<F> {
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>().max(f64::MIN_POSITIVE);
            real::<F>(-(-u.ln()).ln())
        })
        .collect()
}

/// Concrete sample from categorical `weights` at temperature `lambda`:
/// `x = softmax((log w + g) / lambda)`.
pub fn concrete_sample<F: Real, R: Rng>(
    weights: &[F],
    lambda: F,
    rng: &mut R,
) -> Result<ConcreteSample<F>> {
    let logits: Vec<F> = weights.iter().map(|w| w.ln()).collect();
    let gumbels = gumbel_noise(weights.len(), rng);
    concrete_from_logits(&logits, lambda, &gumbels)
}

/// Deterministic concrete relaxation for given logits and Gumbel noises.
pub fn concrete_from_logits<F: Real>(
    logits: &[F],
    lambda: F,
    gumbels: &[F],
) -> Result<ConcreteSample<F>> {
    if lambda <= F::zero() {
        return Err(Error::InvalidArgument(format!(
            "concrete temperature must be > 0, got {lambda}"
        )));
    }
    if gumbels.len() != logits.len() {
        return Err(Error::ShapeMismatch {
            context: "concrete_from_logits",
            expected: logits.len(),
            got: gumbels.len(),
        });
    }
    let scaled: Vec<F> = logits
        .iter()
        .zip(gumbels.iter())
        .map(|(&l, &g)| (l + g) / lambda)
        .collect();
    let x = log_softmax(&scaled).iter().map(|l| l.exp()).collect();
    Ok(ConcreteSample {
        x,
        gumbels: gumbels.to_vec(),
        lambda,
    })
}

/// A straight-through action: the forward value is the hard sample of the
/// argmax particle while gradients flow through the relaxed coordinates.
#[derive(Debug, Clone)]
pub struct StraightThroughAction<F: Real> {
    /// `a' = a_{argmax x}`, exactly the hard two-step sample.
    pub value: F,
    pub argmax: usize,
    /// `d a / d logit_j = sum_i (a_i - a') dx_i/dL_j`.
    pub grad_logits: Vec<F>,
    /// `d a / d mu_i`: one on the argmax particle, zero elsewhere.
    pub grad_mu: Vec<F>,
    /// `d a / d xi_i`: the argmax particle's noise, zero elsewhere.
    pub grad_xi: Vec<F>,
}

/// Builds the straight-through action for one dimension from per-particle
/// locations `mu`, noise scales `xi`, a concrete draw, and per-particle
/// Gaussian noises (`a_i = mu_i + xi_i * noise_i`).
pub fn straight_through_action<F: Real>(
    mu: &[F],
    xi: &[F],
    x: &ConcreteSample<F>,
    noise: &[F],
) -> Result<StraightThroughAction<F>> {
    let n = mu.len();
    if xi.len() != n || x.x.len() != n || noise.len() != n {
        return Err(Error::ShapeMismatch {
            context: "straight_through_action",
            expected: n,
            got: xi.len().min(x.x.len()).min(noise.len()),
        });
    }
    let samples: Vec<F> = (0..n).map(|i| mu[i] + xi[i] * noise[i]).collect();
    let j = x.argmax();
    let hard = samples[j];

    // sum_i (a_i - a') dx_i/dL_j collapses to
    // x_j [(a_j - a') - sum_i x_i (a_i - a')] / lambda
    let mut inner = F::zero();
    for i in 0..n {
        inner += x.x[i] * (samples[i] - hard);
    }
    let grad_logits = (0..n)
        .map(|jj| x.x[jj] * ((samples[jj] - hard) - inner) / x.lambda)
        .collect();

    let mut grad_mu = vec![F::zero(); n];
    let mut grad_xi = vec![F::zero(); n];
    grad_mu[j] = F::one();
    grad_xi[j] = noise[j];

    Ok(StraightThroughAction {
        value: hard,
        argmax: j,
        grad_logits,
        grad_mu,
        grad_xi,
    })
}

/// Change-of-variables correction for `a = tanh(u)` in the numerically stable
/// softplus form: `-log(1 - tanh^2 u) = -2 (log 2 - u - softplus(-2u))`.
fn tanh_correction<F: Real>(u: F) -> F {
    let two = real::<F>(2.0);
    -two * (F::LN_2() - u - softplus(-two * u))
}

/// Log-density of `a = tanh(u)` under the head's mixture on `u`, factorized
/// across dimensions. Needs a density head (not the discrete one).
pub fn squashed_log_prob<F: Real>(head: &PolicyHead<F>, state: &[F], u: &[F]) -> Result<F> {
    ensure_density_head(head)?;
    let mixture = head.log_prob(state, u)?;
    let mut corr = F::zero();
    for &uk in u {
        corr += tanh_correction(uk);
    }
    Ok(mixture + corr)
}

/// [`squashed_log_prob`] plus its analytic gradients: parameter gradients of
/// the mixture term (the correction is parameter-free) and the gradient with
/// respect to the pre-squash sample `u`.
pub fn grad_squashed_log_prob<F: Real>(
    head: &PolicyHead<F>,
    state: &[F],
    u: &[F],
) -> Result<(F, HeadGrads<F>, Vec<F>)> {
    ensure_density_head(head)?;
    let (mixture, grads) = head.grad_log_prob(state, u)?;
    let dims = head.mixture_params(state)?;
    let two = real::<F>(2.0);
    let mut value = mixture;
    let mut grad_u = Vec::with_capacity(u.len());
    for (k, &uk) in u.iter().enumerate() {
        value += tanh_correction(uk);
        // mixture score: -sum_i r_i z_i / sigma_i, responsibilities in log space
        let dist = &dims[k];
        let half = real::<F>(0.5);
        let half_log_2pi = half * (two * F::PI()).ln();
        let terms: Vec<F> = (0..dist.mu.len())
            .map(|i| {
                let sigma = dist.log_sigma[i].exp();
                let z = (uk - dist.mu[i]) / sigma;
                dist.log_w[i] - half * z * z - dist.log_sigma[i] - half_log_2pi
            })
            .collect();
        let log_mix = crate::numerics::softmax::log_sum_exp(&terms);
        let mut score = F::zero();
        for (i, &t) in terms.iter().enumerate() {
            let r = (t - log_mix).exp();
            if r > F::zero() {
                let sigma = dist.log_sigma[i].exp();
                let z = (uk - dist.mu[i]) / sigma;
                score -= r * z / sigma;
            }
        }
        grad_u.push(score + two * uk.tanh());
    }
    Ok((value, grads, grad_u))
}

fn ensure_density_head<F: Real>(head: &PolicyHead<F>) -> Result<()> {
    if head.kind() == crate::policy::HeadKind::Discrete {
        return Err(Error::InvalidArgument(
            "tanh squashing needs a density head; the discrete head has none".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyHead;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn relaxed_coordinates_sum_to_one() {
        let mut r = rng(1);
        for _ in 0..100 {
            let w = [0.1, 0.25, 0.6, 0.05];
            let s = concrete_sample(&w, 1.0, &mut r).unwrap();
            let sum: f64 = s.x.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(s.x.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn low_temperature_tracks_categorical_mass() {
        let mut r = rng(2);
        let w = [0.999, 0.001];
        let draws = 1000usize;
        let mut hits = 0usize;
        for _ in 0..draws {
            let s = concrete_sample(&w, 0.01, &mut r).unwrap();
            if s.argmax() == 0 {
                hits += 1;
            }
        }
        let expect = 0.999 * draws as f64;
        let sigma = (draws as f64 * 0.999 * 0.001).sqrt();
        assert!(hits as f64 >= 0.99 * draws as f64);
        assert!((hits as f64 - expect).abs() <= 3.0 * sigma.max(1.0));
    }

    #[test]
    fn concrete_jacobian_matches_finite_differences() {
        let mut r = rng(3);
        let logits = [0.3_f64, -0.8, 1.1, 0.0];
        let gumbels: Vec<f64> = gumbel_noise(4, &mut r);
        for &lambda in &[0.5_f64, 1.0, 2.0] {
            let s = concrete_from_logits(&logits, lambda, &gumbels).unwrap();
            let jac = s.jacobian_logits();
            let h = 1e-6;
            for j in 0..4 {
                let mut plus = logits;
                let mut minus = logits;
                plus[j] += h;
                minus[j] -= h;
                let xp = concrete_from_logits(&plus, lambda, &gumbels).unwrap().x;
                let xm = concrete_from_logits(&minus, lambda, &gumbels).unwrap().x;
                for i in 0..4 {
                    let numeric = (xp[i] - xm[i]) / (2.0 * h);
                    let analytic = jac.get(i, j);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-7);
                    assert!(
                        ((analytic - numeric) / denom).abs() < 1e-5,
                        "dx[{i}]/dL[{j}] analytic {analytic} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_or_negative_temperature_is_rejected() {
        let mut r = rng(4);
        assert!(concrete_sample(&[0.5, 0.5], 0.0, &mut r).is_err());
        assert!(concrete_sample(&[0.5, 0.5], -1.0, &mut r).is_err());
    }

    #[test]
    fn straight_through_forward_is_the_hard_sample() {
        let mut r = rng(5);
        let mu = [-0.5_f64, 0.1, 0.7];
        let xi = [0.2_f64, 0.3, 0.1];
        for _ in 0..50 {
            let w = [0.2, 0.5, 0.3];
            let x = concrete_sample(&w, 1.0, &mut r).unwrap();
            let noise: Vec<f64> = (0..3).map(|_| r.random::<f64>() - 0.5).collect();
            let st = straight_through_action(&mu, &xi, &x, &noise).unwrap();
            let j = st.argmax;
            // bit-exact match with the hard two-step path under shared noise
            assert_eq!(st.value, mu[j] + xi[j] * noise[j]);
        }
    }

    #[test]
    fn straight_through_logit_gradient_matches_relaxed_composite() {
        // the straight-through gradient equals the exact gradient of the
        // relaxed composite sum_i x_i(L) a_i, since sum_i dx_i = 0
        let mut r = rng(6);
        let mu = [-0.6_f64, 0.0, 0.4, 0.9];
        let xi = [0.15_f64, 0.25, 0.2, 0.1];
        let logits = [0.2_f64, -0.3, 0.5, 0.0];
        let gumbels: Vec<f64> = gumbel_noise(4, &mut r);
        let noise: Vec<f64> = (0..4).map(|_| r.random::<f64>() - 0.5).collect();
        let samples: Vec<f64> = (0..4).map(|i| mu[i] + xi[i] * noise[i]).collect();

        let x = concrete_from_logits(&logits, 1.0, &gumbels).unwrap();
        let st = straight_through_action(&mu, &xi, &x, &noise).unwrap();

        let relaxed = |l: &[f64]| -> f64 {
            let xs = concrete_from_logits(l, 1.0, &gumbels).unwrap().x;
            xs.iter().zip(samples.iter()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for j in 0..4 {
            let mut plus = logits;
            let mut minus = logits;
            plus[j] += h;
            minus[j] -= h;
            let numeric = (relaxed(&plus) - relaxed(&minus)) / (2.0 * h);
            let denom = st.grad_logits[j].abs().max(numeric.abs()).max(1e-7);
            assert!(
                ((st.grad_logits[j] - numeric) / denom).abs() < 1e-5,
                "grad_logits[{j}] {} vs {numeric}",
                st.grad_logits[j]
            );
        }
    }

    #[test]
    fn composite_squared_loss_flows_only_through_argmax() {
        // L = a^2: dL/dmu_j = 2 a * delta(j, argmax)
        let mut r = rng(7);
        let mu = [-0.4_f64, 0.3];
        let xi = [0.2_f64, 0.2];
        let w = [0.5, 0.5];
        let x = concrete_sample(&w, 1.0, &mut r).unwrap();
        let noise = [0.1, -0.3];
        let st = straight_through_action(&mu, &xi, &x, &noise).unwrap();
        let dl_da = 2.0 * st.value;
        for j in 0..2 {
            let expect = if j == st.argmax { dl_da } else { 0.0 };
            assert_eq!(dl_da * st.grad_mu[j], expect);
            let expect_xi = if j == st.argmax { dl_da * noise[j] } else { 0.0 };
            assert_eq!(dl_da * st.grad_xi[j], expect_xi);
        }
    }

    fn test_head(seed: u64) -> PolicyHead<f64> {
        let mut r = rng(seed);
        let mut head = PolicyHead::pfpn(2, &[6], 4, 1, &mut r).unwrap();
        for b in head.final_bias_mut() {
            *b = r.random::<f64>() - 0.5;
        }
        let p = head.particles_mut().unwrap();
        for i in 0..4 {
            let lx = p.log_xi(i, 0);
            p.set_log_xi(i, 0, lx + 0.3 * (r.random::<f64>() - 0.5));
        }
        head
    }

    #[test]
    fn squash_correction_vanishes_at_zero() {
        let head = test_head(8);
        let state = [0.2, -0.1];
        let squashed = squashed_log_prob(&head, &state, &[0.0]).unwrap();
        let mixture = head.log_prob(&state, &[0.0]).unwrap();
        assert!((squashed - mixture).abs() < 1e-15);
    }

    #[test]
    fn squashed_matches_direct_change_of_variables() {
        let head = test_head(9);
        let state = [0.2, -0.1];
        let mut r = rng(10);
        for _ in 0..50 {
            let u = 10.0 * (r.random::<f64>() - 0.5); // |u| <= 5
            let squashed = squashed_log_prob(&head, &state, &[u]).unwrap();
            // direct oracle: log mix(u) - log(1 - tanh^2 u)
            let direct =
                head.log_prob(&state, &[u]).unwrap() - (1.0 - u.tanh().powi(2)).ln();
            assert!(
                (squashed - direct).abs() < 1e-10,
                "u={u}: {squashed} vs {direct}"
            );
        }
    }

    #[test]
    fn squashed_stays_finite_in_the_tail() {
        let head = test_head(11);
        let state = [0.2, -0.1];
        let u = 20.0;
        let squashed = squashed_log_prob(&head, &state, &[u]).unwrap();
        assert!(squashed.is_finite());
        // asymptotic correction -2(log 2 - u)
        let mixture = head.log_prob(&state, &[u]).unwrap();
        let corr = squashed - mixture;
        let asymptotic = -2.0 * (std::f64::consts::LN_2 - u);
        assert!((corr - asymptotic).abs() < 1e-8);
    }

    #[test]
    fn squashed_gradients_match_finite_differences() {
        let head = test_head(12);
        let state = [0.2, -0.1];
        let u = [0.45];
        let (_, grads, grad_u) = grad_squashed_log_prob(&head, &state, &u).unwrap();

        let h = 1e-5;
        // u gradient
        let fp = squashed_log_prob(&head, &state, &[u[0] + h]).unwrap();
        let fm = squashed_log_prob(&head, &state, &[u[0] - h]).unwrap();
        let numeric = (fp - fm) / (2.0 * h);
        assert!(((grad_u[0] - numeric) / numeric.abs().max(1e-6)).abs() < 1e-5);

        // particle parameter gradients
        let n = head.components();
        for i in 0..n {
            let mut plus = head.clone();
            let mut minus = head.clone();
            let mu = head.particles().unwrap().mu(i, 0);
            plus.particles_mut().unwrap().set_mu(i, 0, mu + h);
            minus.particles_mut().unwrap().set_mu(i, 0, mu - h);
            let numeric = (squashed_log_prob(&plus, &state, &u).unwrap()
                - squashed_log_prob(&minus, &state, &u).unwrap())
                / (2.0 * h);
            let denom = grads.mu[i].abs().max(numeric.abs()).max(1e-6);
            assert!(((grads.mu[i] - numeric) / denom).abs() < 1e-4);
        }
        // logit bias gradients
        for j in 0..n {
            let mut plus = head.clone();
            let mut minus = head.clone();
            plus.final_bias_mut()[j] += h;
            minus.final_bias_mut()[j] -= h;
            let numeric = (squashed_log_prob(&plus, &state, &u).unwrap()
                - squashed_log_prob(&minus, &state, &u).unwrap())
                / (2.0 * h);
            let denom = grads.final_b[j].abs().max(numeric.abs()).max(1e-6);
            assert!(((grads.final_b[j] - numeric) / denom).abs() < 1e-4);
        }
    }

    #[test]
    fn discrete_head_is_rejected_for_squashing() {
        let mut r = rng(13);
        let head = PolicyHead::<f64>::discrete(2, &[4], 5, 1, &mut r).unwrap();
        assert!(squashed_log_prob(&head, &[0.0, 0.0], &[0.1]).is_err());
    }

    #[test]
    fn squashed_density_integrates_to_one_after_substitution() {
        // integral over a in (-1,1) of p(a) da equals
        // integral over u of exp(squashed_log_prob(u)) (1 - tanh^2 u) du
        let head = test_head(14);
        let state = [0.2, -0.1];
        let mass: f64 = crate::numerics::quadrature::integrate(-7.0, 7.0, 14, 32, |u: f64| {
            let lp = squashed_log_prob(&head, &state, &[u]).unwrap();
            lp.exp() * (1.0 - u.tanh().powi(2))
        });
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn straight_through_distribution_matches_two_step_sampler() {
        // two-sample Kolmogorov-Smirnov on 100k draws at fixed seed
        let head = test_head(15);
        let state = [0.2, -0.1];
        let n_draws = 100_000usize;

        let mut r1 = rng(16);
        let mut a: Vec<f64> = (0..n_draws)
            .map(|_| head.sample(&state, &mut r1).unwrap().action[0])
            .collect();

        let mut r2 = rng(17);
        let dims = head.mixture_params(&state).unwrap();
        let dist = &dims[0];
        let xi: Vec<f64> = dist.log_sigma.iter().map(|l| l.exp()).collect();
        let mut b: Vec<f64> = (0..n_draws)
            .map(|_| {
                let x = concrete_sample(&dist.w, 1.0, &mut r2).unwrap();
                let noise: Vec<f64> = (0..4)
                    .map(|_| r2.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect();
                straight_through_action(&dist.mu, &xi, &x, &noise)
                    .unwrap()
                    .value
            })
            .collect();

        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let d = ks_statistic(&a, &b);
        let n_eff = (n_draws * n_draws) as f64 / (2.0 * n_draws as f64);
        let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
        let p = ks_survival(lambda);
        assert!(p > 0.01, "KS D={d}, p={p}");
    }

    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let (mut i, mut j) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / a.len() as f64;
            let fb = j as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    fn ks_survival(lambda: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * (-2.0 * kf * kf * lambda * lambda).exp();
        }
        (2.0 * total).clamp(0.0, 1.0)
    }
}
