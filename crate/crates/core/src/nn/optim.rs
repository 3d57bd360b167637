use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment accumulators mirroring a model's parameter buffers.
///
/// Buffers are allocated on the first step; later steps must present the
/// same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    cfg: OptimizerConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let grads = grads.param_slices();
        let mut params = params.param_slices_mut();
        if params.len() != grads.len()
            || params.iter().zip(&grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape(
                "gradient buffers do not match parameter buffers".into(),
            ));
        }
        if self.step == 0 && self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(&params).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::Shape(
                "optimizer state does not match parameter buffers".into(),
            ));
        }

        self.step += 1;
        let lr = self.cfg.learning_rate;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads) {
                    p.iter_mut().zip(g.iter()).for_each(|(p, g)| *p -= lr * g);
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps);
                let c1 = 1.0 - b1.powi(self.step as i32);
                let c2 = 1.0 - b2.powi(self.step as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(&grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = b1 * m[i] + (1.0 - b1) * gi;
                        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(Vec<f64>);

    impl Parameters for Flat {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Flat(vec![1.0, -2.0, 3.0]);
        let mut opt = OptimizerState::new(OptimizerConfig::default());
        opt.step(&mut p, &Flat(vec![0.0; 3])).unwrap();
        assert_eq!(p.0, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_adam_step_matches_hand_formula() {
        let g = [0.5, -2.0, 1e-3];
        let mut p = Flat(vec![0.0; 3]);
        let mut opt = OptimizerState::new(OptimizerConfig::default());
        opt.step(&mut p, &Flat(g.to_vec())).unwrap();
        for (pi, gi) in p.0.iter().zip(g) {
            // m_hat = g, v_hat = g^2  =>  delta = -lr * g / (|g| + eps)
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn identical_runs_are_reproducible() {
        let run = || {
            let mut p = Flat(vec![0.3, 0.7]);
            let mut opt = OptimizerState::new(OptimizerConfig::default());
            for _ in 0..2 {
                opt.step(&mut p, &Flat(vec![0.1, -0.4])).unwrap();
            }
            p.0
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = Flat(vec![0.0; 3]);
        let mut opt = OptimizerState::new(OptimizerConfig::default());
        assert!(matches!(
            opt.step(&mut p, &Flat(vec![0.0; 2])),
            Err(Error::Shape(_))
        ));
        opt.step(&mut p, &Flat(vec![0.0; 3])).unwrap();
        let mut q = Flat(vec![0.0; 4]);
        assert!(opt.step(&mut q, &Flat(vec![0.0; 4])).is_err());
    }

    #[test]
    fn sgd_step() {
        let mut p = Flat(vec![1.0]);
        let mut opt = OptimizerState::new(OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.1,
            ..Default::default()
        });
        opt.step(&mut p, &Flat(vec![2.0])).unwrap();
        assert!((p.0[0] - 0.8).abs() < 1e-15);
    }
}
