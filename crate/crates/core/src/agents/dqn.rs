use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::replay::{ReplayBuffer, Transition};
use super::{select_action, td_targets, Hyperparams};
use crate::channel::ApPosition;
use crate::env::{Env, NUM_APS};
use crate::error::{Error, Result};
use crate::nn::{HeadKind, OptimizerConfig, OptimizerState, Parameters, QCache, QNetwork};

pub const TRACE_HEADER: &str = "episode,steps,final_cost,best_cost,epsilon";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeRecord {
    /// 1-based episode number.
    pub episode: usize,
    pub steps: usize,
    pub final_cost: f64,
    /// Best cost seen so far in the whole run.
    pub best_cost: f64,
    /// Exploration rate at the end of the episode.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingResult {
    pub method: &'static str,
    pub seed: u64,
    pub initial_positions: [ApPosition; NUM_APS],
    pub initial_cost: f64,
    /// Lowest-cost state visited at any point during training.
    pub best_positions: [ApPosition; NUM_APS],
    pub best_cost: f64,
    pub total_steps: u64,
    pub gradient_steps: u64,
    #[serde(skip)]
    pub trace: Vec<EpisodeRecord>,
    #[serde(skip)]
    pub net: QNetwork,
}

impl TrainingResult {
    /// Relative reduction of the combined cost, in percent.
    pub fn improvement_pct(&self) -> f64 {
        100.0 * (self.initial_cost - self.best_cost) / self.initial_cost
    }

    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.episode, r.steps, r.final_cost, r.best_cost, r.epsilon
            )?;
        }
        Ok(())
    }

    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_trace(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Trains a Q-network on `env` and reports the best state visited.
///
/// Rewards are divided by the environment's `cost_scale` before they enter
/// the replay buffer so TD targets stay O(1); the reported costs are raw.
pub fn train(env: &mut Env<'_>, kind: HeadKind, hp: &Hyperparams) -> Result<TrainingResult> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut net = QNetwork::new(kind, &hp.network, &mut rng);
    let mut target = net.clone();
    let mut opt = OptimizerState::new(OptimizerConfig {
        kind: hp.optimizer,
        ..OptimizerConfig::adam(hp.learning_rate)
    });
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut cache = QCache::default();
    let mut grads = net.gradients();
    let reward_scale = env.config().cost_scale;
    let threshold = env.config().terminate_threshold;

    let start = env.reset()?;
    let mut best = start;
    let mut eps = hp.epsilon_start;
    let mut total_steps = 0u64;
    let mut trace = Vec::with_capacity(hp.episodes);

    for episode in 1..=hp.episodes {
        let mut state = env.reset()?;
        while state.cost >= threshold && !env.truncated() {
            let obs = env.observe();
            let action = select_action(&net, &obs, eps, &mut rng);
            let out = env.step(action)?;
            total_steps += 1;
            state = out.state;
            if state.cost < best.cost {
                best = state;
            }
            buffer.push(Transition {
                state: obs,
                action,
                reward: out.reward / reward_scale,
                next_state: env.observe(),
                done: out.done,
            });

            if buffer.len() >= hp.batch_size {
                let batch = buffer.sample(hp.batch_size, &mut rng)?;
                let targets = td_targets(&batch, &target, hp.gamma);
                grads.fill_zero();
                let scale = 2.0 / hp.batch_size as f64;
                let mut grad_q = vec![0.0; net.num_actions()];
                for (t, y) in batch.iter().zip(&targets) {
                    let a = t.action.get();
                    let q = net.forward_cached(&t.state, &mut cache)[a];
                    grad_q.fill(0.0);
                    grad_q[a] = scale * (q - y);
                    net.backward(&cache, &grad_q, &mut grads);
                }
                opt.step(&mut net, &grads)?;
            }
            if total_steps % hp.target_sync_every as u64 == 0 {
                target.copy_from(&net);
            }
            eps = hp.next_epsilon(eps, total_steps);
        }
        trace.push(EpisodeRecord {
            episode,
            steps: env.steps(),
            final_cost: state.cost,
            best_cost: best.cost,
            epsilon: eps,
        });
        if episode % 100 == 0 {
            log::info!(
                "{} episode {episode}: best {:.3} at {:?}, eps {eps:.4}",
                kind.name(),
                best.cost,
                best.positions
            );
        }
    }

    Ok(TrainingResult {
        method: kind.name(),
        seed: hp.seed,
        initial_positions: start.positions,
        initial_cost: start.cost,
        best_positions: best.positions,
        best_cost: best.cost,
        total_steps,
        gradient_steps: opt.steps(),
        trace,
        net,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synth_map, AntennaConfig, ReceiverGrid, SyntheticModelParams, TunnelGeometry};
    use crate::cost::CostConfig;
    use crate::env::EnvConfig;

    fn small_map(len: f64) -> crate::channel::PathLossMap {
        let geom = TunnelGeometry::with_length(len);
        let grid = ReceiverGrid::for_geometry(&geom, 1.0).unwrap();
        synth_map(&geom, &AntennaConfig::default(), &grid, &SyntheticModelParams::default()).unwrap()
    }

    fn quick_hp(seed: u64) -> Hyperparams {
        Hyperparams {
            episodes: 5,
            batch_size: 8,
            replay_capacity: 50,
            seed,
            ..Default::default()
        }
    }

    fn env_cfg() -> EnvConfig {
        EnvConfig {
            length_m: 40,
            initial_positions: [0, 20, 40],
            max_steps_per_episode: 20,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_run() {
        let map = small_map(40.0);
        let run = |seed| {
            let mut env = Env::new(&map, CostConfig::default(), env_cfg()).unwrap();
            train(&mut env, HeadKind::Dueling, &quick_hp(seed)).unwrap()
        };
        let (a, b) = (run(3), run(3));
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.net, b.net);
        assert_eq!(a.best_positions, b.best_positions);
    }

    #[test]
    fn best_never_worse_than_start_and_trace_is_monotone() {
        let map = small_map(40.0);
        let mut env = Env::new(&map, CostConfig::default(), env_cfg()).unwrap();
        let res = train(&mut env, HeadKind::Plain, &quick_hp(1)).unwrap();
        assert!(res.best_cost <= res.initial_cost);
        assert_eq!(res.trace.len(), 5);
        assert_eq!(res.total_steps, 100);
        assert!(res.gradient_steps > 0);
        for w in res.trace.windows(2) {
            assert!(w[1].best_cost <= w[0].best_cost);
            assert!(w[1].epsilon <= w[0].epsilon);
        }
        let mut csv = Vec::new();
        res.write_trace(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn starting_below_threshold_takes_no_steps() {
        let map = small_map(40.0);
        let cfg = EnvConfig {
            terminate_threshold: 1e9,
            ..env_cfg()
        };
        let mut env = Env::new(&map, CostConfig::default(), cfg).unwrap();
        let res = train(&mut env, HeadKind::Plain, &quick_hp(0)).unwrap();
        assert_eq!(res.total_steps, 0);
        assert_eq!(res.best_cost, res.initial_cost);
    }
}
