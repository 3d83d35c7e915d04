//! Gauss–Legendre quadrature, used to check that densities integrate to one.

use crate::real::Real;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P'_n(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over `[a, b]` with a composite `order`-point rule split into
/// `panels` equal subintervals.
pub fn integrate<F: Real>(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    mut f: impl FnMut(F) -> F,
) -> F {
    let (nodes, weights) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut total = F::zero();
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = width / 2.0;
        let mid = lo + half;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let t = crate::real::real::<F>(mid + half * x);
            total += crate::real::real::<F>(w * half) * f(t);
        }
    }
    total
}
