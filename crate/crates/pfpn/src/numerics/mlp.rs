//! Fully-connected network with hand-coded forward and reverse passes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::real::{real, Real};

/// Element-wise activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<F: Real>(self, z: F) -> F {
        match self {
            Activation::Relu => {
                if z > F::zero() {
                    z
                } else {
                    F::zero()
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the post-activation output.
    #[inline]
    fn grad_from_output<F: Real>(self, y: F) -> F {
        match self {
            Activation::Relu => {
                if y > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Identity => F::one(),
        }
    }
}

/// One dense layer `y = activation(W x + b)`, weights shaped `(out, in)`.
#[derive(Debug, Clone)]
pub struct DenseLayer<F: Real> {
    pub weight: Matrix<F>,
    pub bias: Vec<F>,
    pub activation: Activation,
}

impl<F: Real> DenseLayer<F> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![F::zero(); out_dim],
            activation,
        }
    }

    /// He-uniform weight init with zero biases.
    pub fn he_init<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| {
            real::<F>(rng.random_range(-limit..limit))
        });
        Self {
            weight,
            bias: vec![F::zero(); out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Multi-layer perceptron; consecutive layer shapes must compose.
#[derive(Debug, Clone)]
pub struct Mlp<F: Real> {
    layers: Vec<DenseLayer<F>>,
}

/// Per-layer activations retained by [`Mlp::forward`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F: Real> {
    /// Input fed to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<F>>,
    /// Post-activation output of each layer.
    outputs: Vec<Vec<F>>,
}

/// Gradients shaped like an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads<F: Real> {
    pub layers: Vec<LayerGrads<F>>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads<F: Real> {
    pub weight: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> MlpGrads<F> {
    pub fn zeros_like(mlp: &Mlp<F>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![F::zero(); l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, s: F) {
        for l in &mut self.layers {
            for w in l.weight.as_mut_slice() {
                *w *= s;
            }
            for b in &mut l.bias {
                *b *= s;
            }
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads<F>) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += *y;
            }
        }
    }
}

impl<F: Real> Mlp<F> {
    pub fn from_layers(layers: Vec<DenseLayer<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("Mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch {
                    context: "Mlp::from_layers composition",
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Builds `sizes[0] -> sizes[1] -> ...` with He init; every layer ReLU
    /// except the last which uses `last_activation`.
    pub fn he_init<R: Rng>(sizes: &[usize], last_activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 2 == sizes.len() {
                    last_activation
                } else {
                    Activation::Relu
                };
                DenseLayer::he_init(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    #[inline]
    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [DenseLayer<F>] {
        &mut self.layers
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Affine/activation composition; the cache suffices for [`Mlp::backward`].
    pub fn forward(&self, input: &[F]) -> Result<(Vec<F>, ForwardCache<F>)> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::forward input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.weight.matvec(&x)?;
            for (zi, b) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += *b;
                *zi = layer.activation.apply(*zi);
            }
            inputs.push(x);
            outputs.push(z.clone());
            x = z;
        }
        Ok((
            x,
            ForwardCache { inputs, outputs },
        ))
    }

    /// Exact reverse-mode gradients of the forward map.
    ///
    /// Returns parameter gradients plus the gradient w.r.t. the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        grad_output: &[F],
    ) -> Result<(MlpGrads<F>, Vec<F>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::backward cache layers",
                expected: self.layers.len(),
                got: cache.inputs.len(),
            });
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::backward grad_output",
                expected: self.output_dim(),
                got: grad_output.len(),
            });
        }
        for (layer, input) in self.layers.iter().zip(cache.inputs.iter()) {
            if input.len() != layer.in_dim() {
                return Err(Error::ShapeMismatch {
                    context: "Mlp::backward stale cache",
                    expected: layer.in_dim(),
                    got: input.len(),
                });
            }
        }

        let mut grads = MlpGrads::zeros_like(self);
        let mut upstream = grad_output.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[idx];
            let output = &cache.outputs[idx];
            // d z = upstream ⊙ activation'(output)
            let mut dz = upstream;
            for (d, y) in dz.iter_mut().zip(output.iter()) {
                *d *= layer.activation.grad_from_output(*y);
            }
            grads.layers[idx].weight.add_outer(&dz, input)?;
            for (gb, d) in grads.layers[idx].bias.iter_mut().zip(dz.iter()) {
                *gb += *d;
            }
            upstream = layer.weight.matvec_transposed(&dz)?;
        }
        Ok((grads, upstream))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mlp(sizes: &[usize], seed: u64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::he_init(sizes, Activation::Identity, &mut rng)
    }

    #[test]
    fn zero_weights_return_bias() {
        let mut layer = DenseLayer::<f64>::zeros(3, 2, Activation::Identity);
        layer.bias = vec![0.5, -1.5];
        let mlp = Mlp::from_layers(vec![layer]).unwrap();
        let (out, _) = mlp.forward(&[10.0, -3.0, 7.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.5]);
    }

    #[test]
    fn identity_layer_passes_through() {
        let layer = DenseLayer {
            weight: Matrix::identity(2),
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
        };
        let mlp = Mlp::from_layers(vec![layer]).unwrap();
        let (out, _) = mlp.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    // brute-force matrix-product oracle, written independently of Mlp::forward
    fn oracle_forward(mlp: &Mlp<f64>, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in mlp.layers() {
            let mut next = vec![0.0; layer.out_dim()];
            for (r, slot) in next.iter_mut().enumerate() {
                let mut acc = layer.bias[r];
                for (c, xv) in x.iter().enumerate() {
                    acc += layer.weight.get(r, c) * xv;
                }
                *slot = match layer.activation {
                    Activation::Relu => acc.max(0.0),
                    Activation::Identity => acc,
                };
            }
            x = next;
        }
        x
    }

    #[test]
    fn random_net_matches_bruteforce_oracle() {
        let mlp = random_mlp(&[5, 7, 6, 3], 42);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let input: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (out, _) = mlp.forward(&input).unwrap();
            let expect = oracle_forward(&mlp, &input);
            for (a, b) in out.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-12, "got {a}, oracle {b}");
            }
        }
    }

    #[test]
    fn zero_grad_output_gives_zero_grads() {
        let mlp = random_mlp(&[4, 5, 2], 3);
        let (_, cache) = mlp.forward(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        let (grads, dx) = mlp.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(dx.iter().all(|v| *v == 0.0));
        for l in &grads.layers {
            assert!(l.weight.as_slice().iter().all(|v| *v == 0.0));
            assert!(l.bias.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn single_linear_layer_analytic_grads() {
        // y = Wx + b: grad W = g xᵀ, grad b = g
        let mlp = random_mlp(&[3, 2], 11);
        let x = [0.5, -1.0, 2.0];
        let g = [2.0, -3.0];
        let (_, cache) = mlp.forward(&x).unwrap();
        let (grads, _) = mlp.backward(&cache, &g).unwrap();
        for r in 0..2 {
            assert_eq!(grads.layers[0].bias[r], g[r]);
            for c in 0..3 {
                assert!((grads.layers[0].weight.get(r, c) - g[r] * x[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        // scalar objective: dot(output, probe); relative error <= 1e-6 at h=1e-5
        let mlp = random_mlp(&[4, 6, 5, 3], 99);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

        let objective = |m: &Mlp<f64>| -> f64 {
            let (out, _) = m.forward(&input).unwrap();
            out.iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
        };

        let (_, cache) = mlp.forward(&input).unwrap();
        let (grads, grad_in) = mlp.backward(&cache, &probe).unwrap();

        let h = 1e-5;
        let check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-6,
                "analytic {analytic} vs numeric {numeric}"
            );
        };

        for li in 0..mlp.layers().len() {
            let (rows, cols) = (mlp.layers()[li].out_dim(), mlp.layers()[li].in_dim());
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = mlp.clone();
                    let mut minus = mlp.clone();
                    let w = mlp.layers()[li].weight.get(r, c);
                    plus.layers_mut()[li].weight.set(r, c, w + h);
                    minus.layers_mut()[li].weight.set(r, c, w - h);
                    let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    check(grads.layers[li].weight.get(r, c), numeric);
                }
                let mut plus = mlp.clone();
                let mut minus = mlp.clone();
                plus.layers_mut()[li].bias[r] += h;
                minus.layers_mut()[li].bias[r] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                check(grads.layers[li].bias[r], numeric);
            }
        }

        // input gradient
        for i in 0..input.len() {
            let mut plus = input.clone();
            let mut minus = input.clone();
            plus[i] += h;
            minus[i] -= h;
            let f = |x: &[f64]| -> f64 {
                let (out, _) = mlp.forward(x).unwrap();
                out.iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
            };
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            check(grad_in[i], numeric);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let a = random_mlp(&[4, 5, 2], 1);
        let b = random_mlp(&[3, 5, 2], 2);
        let (_, cache) = a.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(b.backward(&cache, &[1.0, 1.0]).is_err());
    }
}
