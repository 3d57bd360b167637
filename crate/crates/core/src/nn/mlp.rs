use rand::Rng;

use super::dense::{Activation, DenseGrads, DenseLayer};
use super::Parameters;

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Mlp::forward_cached`]: entry 0 is the input,
/// entry `k + 1` the output of layer `k`.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Self {
        assert!(!layers.is_empty(), "an MLP needs at least one layer");
        for pair in layers.windows(2) {
            assert_eq!(pair[0].out_dim(), pair[1].in_dim(), "layer shapes must chain");
        }
        Self { layers }
    }

    /// ReLU layers of the given widths, He-uniform initialized.
    pub fn relu_stack<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = input;
        for &h in hidden {
            layers.push(DenseLayer::he_uniform(prev, h, Activation::Relu, rng));
            prev = h;
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h);
        }
        h
    }

    pub fn forward_cached<'c>(&self, x: &[f64], cache: &'c mut MlpCache) -> &'c [f64] {
        cache.activations.resize_with(self.layers.len() + 1, Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(x);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.activations.split_at_mut(k + 1);
            let out = &mut rest[0];
            out.resize(layer.out_dim(), 0.0);
            layer.forward_into(&done[k], out);
        }
        cache.output()
    }

    /// Accumulates into `grads` and returns the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(
                &cache.activations[k],
                &cache.activations[k + 1],
                &g,
                &mut grads.layers[k],
            );
        }
        g
    }

    pub fn gradients(&self) -> MlpGrads {
        MlpGrads {
            layers: self.layers.iter().map(DenseGrads::zeros).collect(),
        }
    }
}

impl Parameters for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_slices_mut())
            .collect()
    }
}

impl Parameters for MlpGrads {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_slices_mut())
            .collect()
    }
}
