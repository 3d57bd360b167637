//! Dense networks with hand-written backpropagation.
//!
//! The Q-networks share a ReLU trunk and end in either a plain linear head or
//! a dueling value/advantage pair. The same layer and optimizer machinery
//! drives the cGAN generator and patch critic.

pub mod checkpoint;
pub mod dense;
pub mod mlp;
pub mod optim;
pub mod qnet;

pub use checkpoint::{Checkpoint, LayerRecord};
pub use dense::{Activation, DenseGrads, DenseLayer};
pub use mlp::{Mlp, MlpCache, MlpGrads};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use qnet::{HeadKind, QCache, QGrads, QNetConfig, QNetwork};

/// Uniform view over a model's (or a gradient's) parameter buffers.
///
/// A model and its gradient type yield slices in the same order and shapes,
/// which is what the optimizers rely on.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn fill_zero(&mut self) {
        for s in self.param_slices_mut() {
            s.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn l2_norm(&self) -> f64 {
        self.param_slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}
