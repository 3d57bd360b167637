use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, LayerRecord};
use super::dense::{Activation, DenseGrads, DenseLayer};
use super::mlp::{Mlp, MlpCache, MlpGrads};
use super::Parameters;
use crate::env::{NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Plain,
    Dueling,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Plain => "dqn",
            HeadKind::Dueling => "dueling_dqn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QNetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_actions: usize,
    /// Half-width of the uniform init for the linear head(s).
    pub head_init_limit: f64,
}

impl Default for QNetConfig {
    fn default() -> Self {
        Self {
            input_dim: STATE_DIM,
            hidden: vec![64, 64],
            num_actions: NUM_ACTIONS,
            head_init_limit: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Plain(DenseLayer),
    Dueling {
        value: DenseLayer,
        advantage: DenseLayer,
    },
}

/// Q-network: ReLU trunk followed by a plain or a dueling head.
///
/// The dueling head recombines as `Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a')`,
/// so `sum_a (Q(s,a) - V(s)) = 0` for every state.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    trunk: Mlp,
    head: Head,
}

#[derive(Debug, Clone, Default)]
pub struct QCache {
    trunk: MlpCache,
    value: f64,
    advantages: Vec<f64>,
    q: Vec<f64>,
}

impl QCache {
    pub fn q(&self) -> &[f64] {
        &self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadGrads {
    Plain(DenseGrads),
    Dueling {
        value: DenseGrads,
        advantage: DenseGrads,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QGrads {
    pub trunk: MlpGrads,
    pub head: HeadGrads,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(kind: HeadKind, cfg: &QNetConfig, rng: &mut R) -> Self {
        let trunk = Mlp::relu_stack(cfg.input_dim, &cfg.hidden, rng);
        let width = trunk.output_dim();
        let lim = cfg.head_init_limit;
        let head = match kind {
            HeadKind::Plain => Head::Plain(DenseLayer::uniform(
                width,
                cfg.num_actions,
                Activation::Linear,
                lim,
                rng,
            )),
            HeadKind::Dueling => Head::Dueling {
                value: DenseLayer::uniform(width, 1, Activation::Linear, lim, rng),
                advantage: DenseLayer::uniform(width, cfg.num_actions, Activation::Linear, lim, rng),
            },
        };
        Self { trunk, head }
    }

    pub fn from_parts(trunk: Mlp, head: Head) -> Result<Self> {
        let width = trunk.output_dim();
        let ok = match &head {
            Head::Plain(h) => h.in_dim() == width,
            Head::Dueling { value, advantage } => {
                value.in_dim() == width && advantage.in_dim() == width && value.out_dim() == 1
            }
        };
        if !ok {
            return Err(Error::Shape("head does not fit trunk width".into()));
        }
        Ok(Self { trunk, head })
    }

    pub fn kind(&self) -> HeadKind {
        match self.head {
            Head::Plain(_) => HeadKind::Plain,
            Head::Dueling { .. } => HeadKind::Dueling,
        }
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Head {
        &mut self.head
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        match &self.head {
            Head::Plain(h) => h.out_dim(),
            Head::Dueling { advantage, .. } => advantage.out_dim(),
        }
    }

    pub fn forward(&self, s: &[f64]) -> Vec<f64> {
        let mut cache = QCache::default();
        self.forward_cached(s, &mut cache);
        cache.q
    }

    /// `(V(s), A(s, .))` for a dueling network, `None` for a plain one.
    pub fn value_and_advantages(&self, s: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut cache = QCache::default();
        self.forward_cached(s, &mut cache);
        match self.head {
            Head::Dueling { .. } => Some((cache.value, cache.advantages)),
            Head::Plain(_) => None,
        }
    }

    pub fn forward_cached<'c>(&self, s: &[f64], cache: &'c mut QCache) -> &'c [f64] {
        let h = self.trunk.forward_cached(s, &mut cache.trunk);
        match &self.head {
            Head::Plain(layer) => {
                cache.q.resize(layer.out_dim(), 0.0);
                layer.forward_into(h, &mut cache.q);
            }
            Head::Dueling { value, advantage } => {
                let mut v = [0.0];
                value.forward_into(h, &mut v);
                cache.value = v[0];
                cache.advantages.resize(advantage.out_dim(), 0.0);
                advantage.forward_into(h, &mut cache.advantages);
                let mean =
                    cache.advantages.iter().sum::<f64>() / cache.advantages.len() as f64;
                cache.q.clear();
                cache
                    .q
                    .extend(cache.advantages.iter().map(|a| v[0] + (a - mean)));
            }
        }
        &cache.q
    }

    /// Accumulate gradients of a scalar loss whose derivative w.r.t. the Q
    /// outputs is `grad_q`, using the activations in `cache`.
    pub fn backward(&self, cache: &QCache, grad_q: &[f64], grads: &mut QGrads) {
        let h = cache.trunk.output();
        let grad_h = match (&self.head, &mut grads.head) {
            (Head::Plain(layer), HeadGrads::Plain(g)) => layer.backward(h, &cache.q, grad_q, g),
            (
                Head::Dueling { value, advantage },
                HeadGrads::Dueling {
                    value: gv,
                    advantage: ga,
                },
            ) => {
                let total: f64 = grad_q.iter().sum();
                let mean = total / grad_q.len() as f64;
                let grad_adv: Vec<f64> = grad_q.iter().map(|g| g - mean).collect();
                let mut gh = value.backward(h, &[cache.value], &[total], gv);
                let gh_adv = advantage.backward(h, &cache.advantages, &grad_adv, ga);
                gh.iter_mut().zip(gh_adv).for_each(|(a, b)| *a += b);
                gh
            }
            _ => panic!("gradient buffer does not match network head"),
        };
        self.trunk.backward(&cache.trunk, &grad_h, &mut grads.trunk);
    }

    pub fn gradients(&self) -> QGrads {
        QGrads {
            trunk: self.trunk.gradients(),
            head: match &self.head {
                Head::Plain(l) => HeadGrads::Plain(DenseGrads::zeros(l)),
                Head::Dueling { value, advantage } => HeadGrads::Dueling {
                    value: DenseGrads::zeros(value),
                    advantage: DenseGrads::zeros(advantage),
                },
            },
        }
    }

    /// Copy all parameters from `other` (target-network sync).
    pub fn copy_from(&mut self, other: &QNetwork) {
        self.clone_from(other);
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut layers: Vec<LayerRecord> = self
            .trunk
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| LayerRecord::from_layer(format!("trunk.{i}"), l))
            .collect();
        match &self.head {
            Head::Plain(l) => layers.push(LayerRecord::from_layer("head", l)),
            Head::Dueling { value, advantage } => {
                layers.push(LayerRecord::from_layer("value", value));
                layers.push(LayerRecord::from_layer("advantage", advantage));
            }
        }
        let kind = match self.kind() {
            HeadKind::Plain => "q-plain",
            HeadKind::Dueling => "q-dueling",
        };
        Checkpoint::new(kind, serde_json::Value::Null, layers)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.check_version()?;
        let mut trunk = Vec::new();
        let mut named = std::collections::HashMap::new();
        for rec in &ckpt.layers {
            let layer = rec.to_layer()?;
            if rec.name.starts_with("trunk.") {
                trunk.push(layer);
            } else {
                named.insert(rec.name.as_str(), layer);
            }
        }
        if trunk.is_empty() {
            return Err(Error::Shape("checkpoint has no trunk layers".into()));
        }
        let take = |named: &mut std::collections::HashMap<&str, DenseLayer>, n: &str| {
            named
                .remove(n)
                .ok_or_else(|| Error::Shape(format!("checkpoint missing layer `{n}`")))
        };
        let head = match ckpt.kind.as_str() {
            "q-plain" => Head::Plain(take(&mut named, "head")?),
            "q-dueling" => Head::Dueling {
                value: take(&mut named, "value")?,
                advantage: take(&mut named, "advantage")?,
            },
            other => {
                return Err(Error::Shape(format!(
                    "checkpoint kind `{other}` is not a Q-network"
                )))
            }
        };
        let chain_ok = trunk.windows(2).all(|w| w[0].out_dim() == w[1].in_dim());
        if !chain_ok {
            return Err(Error::Shape("trunk layer shapes do not chain".into()));
        }
        Self::from_parts(Mlp::new(trunk), head)
    }
}

impl Parameters for QNetwork {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_slices();
        match &self.head {
            Head::Plain(l) => out.extend(l.param_slices()),
            Head::Dueling { value, advantage } => {
                out.extend(value.param_slices());
                out.extend(advantage.param_slices());
            }
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_slices_mut();
        match &mut self.head {
            Head::Plain(l) => out.extend(l.param_slices_mut()),
            Head::Dueling { value, advantage } => {
                out.extend(value.param_slices_mut());
                out.extend(advantage.param_slices_mut());
            }
        }
        out
    }
}

impl Parameters for QGrads {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_slices();
        match &self.head {
            HeadGrads::Plain(l) => out.extend(l.param_slices()),
            HeadGrads::Dueling { value, advantage } => {
                out.extend(value.param_slices());
                out.extend(advantage.param_slices());
            }
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_slices_mut();
        match &mut self.head {
            HeadGrads::Plain(l) => out.extend(l.param_slices_mut()),
            HeadGrads::Dueling { value, advantage } => {
                out.extend(value.param_slices_mut());
                out.extend(advantage.param_slices_mut());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dueling(v: f64, adv: &[f64]) -> QNetwork {
        // one-unit trunk passing a constant 1 through; heads read biases only
        let trunk = Mlp::new(vec![DenseLayer::from_parts(
            1,
            1,
            vec![0.0],
            vec![1.0],
            Activation::Relu,
        )
        .unwrap()]);
        let value = DenseLayer::from_parts(1, 1, vec![0.0], vec![v], Activation::Linear).unwrap();
        let advantage = DenseLayer::from_parts(
            1,
            adv.len(),
            vec![0.0; adv.len()],
            adv.to_vec(),
            Activation::Linear,
        )
        .unwrap();
        QNetwork::from_parts(trunk, Head::Dueling { value, advantage }).unwrap()
    }

    #[test]
    fn dueling_aggregation_toy() {
        let net = toy_dueling(5.0, &[1.0, 2.0, 3.0]);
        assert_eq!(net.forward(&[0.3]), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [HeadKind::Plain, HeadKind::Dueling] {
            let mut net = QNetwork::new(kind, &QNetConfig::default(), &mut rng);
            net.fill_zero();
            assert_eq!(net.forward(&[0.1, 0.2, 0.3, 0.4]), vec![0.0; NUM_ACTIONS]);
        }
    }

    #[test]
    fn advantage_bias_shift_leaves_q_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = QNetwork::new(HeadKind::Dueling, &QNetConfig::default(), &mut rng);
        let s = [0.2, 0.5, 0.7, 1.3];
        let before = net.forward(&s);
        if let Head::Dueling { advantage, .. } = net.head_mut() {
            advantage.biases_mut().iter_mut().for_each(|b| *b += 3.25);
        }
        let after = net.forward(&s);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(HeadKind::Dueling, &QNetConfig::default(), &mut rng);
        let mut cache = QCache::default();
        net.forward_cached(&[0.1, 0.9, 0.4, 2.0], &mut cache);
        let mut grads = net.gradients();
        net.backward(&cache, &[0.0; NUM_ACTIONS], &mut grads);
        assert_eq!(grads.l2_norm(), 0.0);
    }

    #[test]
    fn architecture_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = QNetwork::new(HeadKind::Dueling, &QNetConfig::default(), &mut rng);
        let dims: Vec<(usize, usize)> = net
            .trunk()
            .layers()
            .iter()
            .map(|l| (l.in_dim(), l.out_dim()))
            .collect();
        assert_eq!(dims, vec![(4, 64), (64, 64)]);
        assert_eq!(net.num_actions(), 27);
    }

    #[test]
    fn snapshot_is_independent_of_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = QNetwork::new(HeadKind::Plain, &QNetConfig::default(), &mut rng);
        let snapshot = net.clone();
        assert_eq!(snapshot, net);
        let s = [0.3, 0.1, 0.8, 0.9];
        assert_eq!(snapshot.forward(&s), net.forward(&s));
        net.param_slices_mut()[0][0] += 1.0;
        assert_ne!(snapshot, net);
        let mut target = snapshot.clone();
        target.copy_from(&net);
        assert_eq!(target.forward(&s), net.forward(&s));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [HeadKind::Plain, HeadKind::Dueling] {
            let net = QNetwork::new(kind, &QNetConfig::default(), &mut rng);
            let json = serde_json::to_string(&net.to_checkpoint()).unwrap();
            let back: Checkpoint = serde_json::from_str(&json).unwrap();
            assert_eq!(QNetwork::from_checkpoint(&back).unwrap(), net);
        }
    }
}
