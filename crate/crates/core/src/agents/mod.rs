//! DQN and Dueling DQN agents for the placement MDP.
//!
//! Both variants share everything except the network head: epsilon-greedy
//! exploration with multiplicative decay per environment step, a uniform
//! replay buffer, a target network synced every `target_sync_every`
//! environment steps, and mean-squared TD error minimized with Adam.

mod dqn;
mod replay;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dqn::{train, EpisodeRecord, TrainingResult};
pub use replay::{ReplayBuffer, Transition};

use crate::env::ActionIndex;
use crate::error::{Error, Result};
use crate::nn::{OptimizerKind, QNetConfig, QNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EpsilonSchedule {
    /// `eps <- max(eps * decay, eps_min)` after every environment step.
    Multiplicative,
    /// `eps_t = eps_min + (eps_start - eps_min) * exp(-rate * t)`, t in steps.
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub epsilon_schedule: EpsilonSchedule,
    pub episodes: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target network sync period in environment steps.
    pub target_sync_every: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub network: QNetConfig,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            epsilon_schedule: EpsilonSchedule::Multiplicative,
            episodes: 1500,
            batch_size: 64,
            replay_capacity: 2000,
            target_sync_every: 100,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            network: QNetConfig::default(),
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !(self.epsilon_min > 0.0
            && self.epsilon_min <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return Err(Error::config(
                "epsilon bounds must satisfy 0 < eps_min <= eps_start <= 1",
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(Error::config("epsilon_decay must lie in (0, 1]"));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(Error::config(
                "batch_size must be in [1, replay_capacity]",
            ));
        }
        if self.target_sync_every == 0 {
            return Err(Error::config("target_sync_every must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if let EpsilonSchedule::Exponential { rate } = self.epsilon_schedule {
            if !(rate >= 0.0) {
                return Err(Error::config("exponential epsilon rate must be >= 0"));
            }
        }
        Ok(())
    }

    /// Exploration rate after `step` environment steps, given the previous rate.
    pub fn next_epsilon(&self, eps: f64, step: u64) -> f64 {
        match self.epsilon_schedule {
            EpsilonSchedule::Multiplicative => decay_epsilon(eps, self.epsilon_decay, self.epsilon_min),
            EpsilonSchedule::Exponential { rate } => {
                self.epsilon_min
                    + (self.epsilon_start - self.epsilon_min) * (-rate * step as f64).exp()
            }
        }
    }
}

pub fn decay_epsilon(eps: f64, decay: f64, eps_min: f64) -> f64 {
    (eps * decay).max(eps_min)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy: uniform random action with probability `epsilon`,
/// otherwise the greedy action of `net`.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> ActionIndex {
    let explore = rng.gen::<f64>() < epsilon;
    let idx = if explore {
        rng.gen_range(0..net.num_actions())
    } else {
        argmax(&net.forward(state))
    };
    ActionIndex::new(idx).expect("network has 27 actions")
}

/// `y = r` for terminal transitions, else `r + gamma * max_a' Q_target(s', a')`.
pub fn td_targets(batch: &[&Transition], target: &QNetwork, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let q = target.forward(&t.next_state);
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}
