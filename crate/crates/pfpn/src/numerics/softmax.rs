//! Numerically stable softmax family.

use crate::real::Real;

/// `log(sum_i exp(x_i))` via max subtraction; `-inf` for an empty slice.
pub fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let mut max = F::neg_infinity();
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut acc = F::zero();
    for &x in xs {
        acc += (x - max).exp();
    }
    max + acc.ln()
}

/// Log-probabilities `x_i - log_sum_exp(x)`.
pub fn log_softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&x| x - lse).collect()
}

/// Probabilities summing to one.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    log_softmax(logits).iter().map(|l| l.exp()).collect()
}

/// `log(1 + exp(x))` without overflow on either tail.
pub fn softplus<F: Real>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
