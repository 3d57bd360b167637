use rand::Rng;
use serde_json::json;

use super::dataset::{coarse_knots, upsample};
use crate::error::{Error, Result};
use crate::nn::{
    Activation, Checkpoint, DenseLayer, LayerRecord, Mlp, MlpCache, MlpGrads, Parameters,
};

/// Coarse profile + condition -> fine profile.
///
/// The MLP predicts a correction that is added to the linear upsampling of
/// the coarse input. Its last layer starts at zero, so an untrained
/// generator reproduces the upsampled profile exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    mlp: Mlp,
    knots: Vec<usize>,
    downsample: usize,
    n_c: usize,
    /// Affine normalization applied to the coarse input before the MLP.
    in_offset: f64,
    in_scale: f64,
}

/// Sliding-window critic: scores each window of the candidate's deviation
/// from the upsampled input, together with the upsampled window and `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    mlp: Mlp,
    window: usize,
    stride: usize,
    in_offset: f64,
    in_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CganNets {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub lambda_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetShape {
    pub n_y: usize,
    pub downsample: usize,
    pub n_c: usize,
    pub gen_hidden: usize,
    pub disc_hidden: usize,
    pub window: usize,
    pub stride: usize,
    pub in_offset: f64,
    pub in_scale: f64,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Self {
        let knots = coarse_knots(shape.n_y, shape.downsample);
        let n_in = knots.len() + shape.n_c;
        let h = shape.gen_hidden;
        let mlp = Mlp::new(vec![
            DenseLayer::he_uniform(n_in, h, Activation::Relu, rng),
            DenseLayer::he_uniform(h, h, Activation::Relu, rng),
            DenseLayer::zeros(h, shape.n_y, Activation::Linear),
        ]);
        Self {
            mlp,
            knots,
            downsample: shape.downsample,
            n_c: shape.n_c,
            in_offset: shape.in_offset,
            in_scale: shape.in_scale,
        }
    }

    pub fn n_x(&self) -> usize {
        self.knots.len()
    }

    pub fn n_y(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn knots(&self) -> &[usize] {
        &self.knots
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    fn check(&self, x: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.n_x() || c.len() != self.n_c {
            return Err(Error::Shape(format!(
                "generator expects n_x={} and n_c={}, got {} and {}",
                self.n_x(),
                self.n_c,
                x.len(),
                c.len()
            )));
        }
        Ok(())
    }

    fn input(&self, x: &[f64], c: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|v| (v - self.in_offset) / self.in_scale)
            .chain(c.iter().copied())
            .collect()
    }

    pub fn forward(&self, x: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.check(x, c)?;
        let mut out = upsample(x, &self.knots);
        for (o, r) in out.iter_mut().zip(self.mlp.forward(&self.input(x, c))) {
            *o += r;
        }
        Ok(out)
    }

    /// Forward pass reusing a precomputed upsampling; keeps activations.
    pub(crate) fn forward_cached(
        &self,
        x: &[f64],
        c: &[f64],
        upsampled: &[f64],
        cache: &mut MlpCache,
    ) -> Vec<f64> {
        let r = self.mlp.forward_cached(&self.input(x, c), cache);
        upsampled.iter().zip(r).map(|(u, r)| u + r).collect()
    }

    /// The skip path has no parameters, so `d out / d residual` is identity.
    pub(crate) fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut MlpGrads) {
        self.mlp.backward(cache, grad_out, grads);
    }

    pub fn gradients(&self) -> MlpGrads {
        self.mlp.gradients()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let layers = self
            .mlp
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord::from_layer(format!("mlp.{i}"), l))
            .collect();
        Checkpoint::new(
            "cgan-generator",
            json!({
                "n_y": self.n_y(),
                "downsample": self.downsample,
                "n_c": self.n_c,
                "in_offset": self.in_offset,
                "in_scale": self.in_scale,
            }),
            layers,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.check_version()?;
        if ckpt.kind != "cgan-generator" {
            return Err(Error::Shape(format!("expected a cgan-generator checkpoint, got `{}`", ckpt.kind)));
        }
        let meta = |k: &str| {
            ckpt.meta
                .get(k)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Shape(format!("checkpoint meta lacks `{k}`")))
        };
        let n_y = meta("n_y")? as usize;
        let downsample = meta("downsample")? as usize;
        let n_c = meta("n_c")? as usize;
        let layers = (0..ckpt.layers.len())
            .map(|i| ckpt.layer(&format!("mlp.{i}")))
            .collect::<Result<Vec<_>>>()?;
        let knots = coarse_knots(n_y, downsample);
        let fits = layers.len() >= 2
            && layers[0].in_dim() == knots.len() + n_c
            && layers.last().unwrap().out_dim() == n_y
            && layers.windows(2).all(|w| w[0].out_dim() == w[1].in_dim());
        if !fits {
            return Err(Error::Shape("generator layers do not chain".into()));
        }
        Ok(Self {
            mlp: Mlp::new(layers),
            knots,
            downsample,
            n_c,
            in_offset: meta("in_offset")?,
            in_scale: meta("in_scale")?,
        })
    }
}

impl Parameters for Generator {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.mlp.param_slices()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.mlp.param_slices_mut()
    }
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Self {
        let n_in = 2 * shape.window + shape.n_c;
        let mlp = Mlp::new(vec![
            DenseLayer::he_uniform(n_in, shape.disc_hidden, Activation::Relu, rng),
            DenseLayer::he_uniform(shape.disc_hidden, 1, Activation::Linear, rng),
        ]);
        Self {
            mlp,
            window: shape.window,
            stride: shape.stride,
            in_offset: shape.in_offset,
            in_scale: shape.in_scale,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Window start indices for a profile of length `n_y`.
    pub fn window_starts(&self, n_y: usize) -> Vec<usize> {
        if n_y < self.window {
            return Vec::new();
        }
        (0..=n_y - self.window).step_by(self.stride).collect()
    }

    fn window_input(&self, y: &[f64], upsampled: &[f64], c: &[f64], start: usize) -> Vec<f64> {
        let span = start..start + self.window;
        let dev = y[span.clone()]
            .iter()
            .zip(&upsampled[span.clone()])
            .map(|(a, u)| a - u);
        let ctx = upsampled[span].iter().map(|u| (u - self.in_offset) / self.in_scale);
        dev.chain(ctx).chain(c.iter().copied()).collect()
    }

    /// One realness logit per window.
    pub fn scores(&self, y: &[f64], upsampled: &[f64], c: &[f64]) -> Vec<f64> {
        self.window_starts(y.len())
            .into_iter()
            .map(|s| self.mlp.forward(&self.window_input(y, upsampled, c, s))[0])
            .collect()
    }

    /// Like [`scores`](Self::scores), keeping one activation cache per window
    /// for [`backward_cached`](Self::backward_cached).
    pub(crate) fn scores_cached(
        &self,
        y: &[f64],
        upsampled: &[f64],
        c: &[f64],
        caches: &mut Vec<MlpCache>,
    ) -> Vec<f64> {
        let starts = self.window_starts(y.len());
        caches.resize_with(starts.len(), MlpCache::default);
        starts
            .into_iter()
            .zip(caches.iter_mut())
            .map(|(s, cache)| self.mlp.forward_cached(&self.window_input(y, upsampled, c, s), cache)[0])
            .collect()
    }

    /// Accumulates parameter gradients for `d loss / d logit_w = grad_logits[w]`
    /// from the caches of the matching `scores_cached` call and returns `d loss / d y`.
    pub(crate) fn backward_cached(
        &self,
        n_y: usize,
        caches: &[MlpCache],
        grad_logits: &[f64],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        let mut grad_y = vec![0.0; n_y];
        for ((s, cache), g) in self.window_starts(n_y).into_iter().zip(caches).zip(grad_logits) {
            let gin = self.mlp.backward(cache, &[*g], grads);
            for (gy, gi) in grad_y[s..s + self.window].iter_mut().zip(&gin) {
                *gy += gi;
            }
        }
        grad_y
    }

    /// Recomputes the window activations, then as [`backward_cached`](Self::backward_cached).
    pub(crate) fn backward(
        &self,
        y: &[f64],
        upsampled: &[f64],
        c: &[f64],
        grad_logits: &[f64],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        let mut caches = Vec::new();
        self.scores_cached(y, upsampled, c, &mut caches);
        self.backward_cached(y.len(), &caches, grad_logits, grads)
    }

    pub fn gradients(&self) -> MlpGrads {
        self.mlp.gradients()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let layers = self
            .mlp
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord::from_layer(format!("mlp.{i}"), l))
            .collect();
        Checkpoint::new(
            "cgan-discriminator",
            json!({
                "window": self.window,
                "stride": self.stride,
                "in_offset": self.in_offset,
                "in_scale": self.in_scale,
            }),
            layers,
        )
    }
}

impl Parameters for Discriminator {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.mlp.param_slices()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.mlp.param_slices_mut()
    }
}

impl CganNets {
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, lambda_l1: f64, rng: &mut R) -> Self {
        let generator = Generator::new(shape, rng);
        let discriminator = Discriminator::new(shape, rng);
        Self {
            generator,
            discriminator,
            lambda_l1,
        }
    }
}

/// Generator prediction for coarse input `x` and condition `c`.
pub fn generator_forward(nets: &CganNets, x: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    nets.generator.forward(x, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> NetShape {
        NetShape {
            n_y: 41,
            downsample: 4,
            n_c: 5,
            gen_hidden: 16,
            disc_hidden: 8,
            window: 16,
            stride: 16,
            in_offset: 100.0,
            in_scale: 20.0,
        }
    }

    #[test]
    fn untrained_generator_is_the_upsampled_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let nets = CganNets::new(&shape(), 100.0, &mut rng);
        let x: Vec<f64> = (0..11).map(|i| 50.0 + (i * i) as f64).collect();
        let c = [0.1, 0.2, 0.3, 0.4, 0.5];
        let y = generator_forward(&nets, &x, &c).unwrap();
        assert_eq!(y, upsample(&x, &coarse_knots(41, 4)));
        assert_eq!(y, generator_forward(&nets, &x, &c).unwrap());
        assert!(generator_forward(&nets, &x[1..], &c).is_err());
    }

    #[test]
    fn critic_emits_one_score_per_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Discriminator::new(&shape(), &mut rng);
        let y = vec![60.0; 41];
        assert_eq!(d.window_starts(41), vec![0, 16]);
        assert_eq!(d.scores(&y, &y, &[0.0; 5]).len(), 2);
    }

    #[test]
    fn generator_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = Generator::new(&shape(), &mut rng);
        let n = g.num_params();
        let flat: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        g.set_flat_params(&flat);
        let back = Generator::from_checkpoint(&g.to_checkpoint()).unwrap();
        assert_eq!(back, g);
    }
}
