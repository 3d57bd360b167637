//! Three-AP placement MDP.
//!
//! The state is the AP triple plus its combined cost. Each of the 27 actions
//! moves every AP by `-step`, `0` or `+step` meters, clipped to `[0, L]`. The
//! reward is the negated cost of the next placement and an episode ends once
//! that cost drops below the termination threshold.

use serde::{Deserialize, Serialize};

use crate::channel::{ApPosition, PathLossMap};
use crate::cost::{combined_cost, CostConfig};
use crate::error::{Error, Result};

pub const NUM_APS: usize = 3;
pub const NUM_ACTIONS: usize = 27;
pub const STATE_DIM: usize = 4;

/// Per-AP movement directions, each in {-1, 0, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action([i8; NUM_APS]);

impl Action {
    pub fn new(moves: [i8; NUM_APS]) -> Result<Self> {
        if moves.iter().any(|m| !(-1..=1).contains(m)) {
            return Err(Error::domain(format!(
                "action components must be in {{-1, 0, 1}}, got {moves:?}"
            )));
        }
        Ok(Self(moves))
    }

    pub fn moves(&self) -> [i8; NUM_APS] {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS as u8).map(|i| decode(ActionIndex(i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionIndex(u8);

impl ActionIndex {
    pub fn new(idx: usize) -> Result<Self> {
        if idx >= NUM_ACTIONS {
            return Err(Error::domain(format!(
                "action index {idx} outside [0, {}]",
                NUM_ACTIONS - 1
            )));
        }
        Ok(Self(idx as u8))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Base-3 encoding with each component shifted to {0, 1, 2}.
pub fn encode(a: Action) -> ActionIndex {
    let [a1, a2, a3] = a.0.map(|v| (v + 1) as u8);
    ActionIndex(a1 * 9 + a2 * 3 + a3)
}

pub fn decode(idx: ActionIndex) -> Action {
    let i = idx.0 as i8;
    Action([i / 9 - 1, (i % 9) / 3 - 1, i % 3 - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub positions: [ApPosition; NUM_APS],
    /// Combined cost of `positions`.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Movement step in meters.
    pub step_m: i64,
    pub length_m: i64,
    pub terminate_threshold: f64,
    pub max_steps_per_episode: usize,
    pub initial_positions: [ApPosition; NUM_APS],
    /// Divisor for the cost entry of the network observation (and rewards).
    pub cost_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            step_m: 1,
            length_m: 1500,
            terminate_threshold: 20.0,
            max_steps_per_episode: 200,
            initial_positions: [0, 500, 1000],
            cost_scale: 300.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_m < 1 {
            return Err(Error::config("step_m must be >= 1"));
        }
        if self.length_m < 1 {
            return Err(Error::config("length_m must be >= 1"));
        }
        if !self.terminate_threshold.is_finite() {
            return Err(Error::config("terminate_threshold must be finite"));
        }
        if !(self.cost_scale.is_finite() && self.cost_scale > 0.0) {
            return Err(Error::config("cost_scale must be > 0"));
        }
        if let Some(x) = self
            .initial_positions
            .iter()
            .find(|&&x| x < 0 || x > self.length_m)
        {
            return Err(Error::config(format!(
                "initial position {x} outside [0, {}]",
                self.length_m
            )));
        }
        Ok(())
    }

    /// Network input: positions scaled by L, cost scaled by `cost_scale`.
    pub fn observe(&self, s: &State) -> [f64; STATE_DIM] {
        let l = self.length_m as f64;
        [
            s.positions[0] as f64 / l,
            s.positions[1] as f64 / l,
            s.positions[2] as f64 / l,
            s.cost / self.cost_scale,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub reward: f64,
    pub done: bool,
}

pub fn apply_action(
    positions: [ApPosition; NUM_APS],
    action: Action,
    env_cfg: &EnvConfig,
) -> [ApPosition; NUM_APS] {
    let mut next = positions;
    for (x, a) in next.iter_mut().zip(action.0) {
        *x = (*x + a as i64 * env_cfg.step_m).clamp(0, env_cfg.length_m);
    }
    next
}

pub fn step(
    s: &State,
    idx: ActionIndex,
    map: &PathLossMap,
    cost_cfg: &CostConfig,
    env_cfg: &EnvConfig,
) -> Result<StepOutcome> {
    let positions = apply_action(s.positions, decode(idx), env_cfg);
    let cost = combined_cost(&positions, map, cost_cfg)?;
    Ok(StepOutcome {
        state: State { positions, cost },
        reward: -cost,
        done: cost < env_cfg.terminate_threshold,
    })
}

pub fn reset(env_cfg: &EnvConfig, map: &PathLossMap, cost_cfg: &CostConfig) -> Result<State> {
    let positions = env_cfg.initial_positions;
    Ok(State {
        positions,
        cost: combined_cost(&positions, map, cost_cfg)?,
    })
}

/// Episode driver over a shared read-only map.
#[derive(Debug, Clone)]
pub struct Env<'a> {
    map: &'a PathLossMap,
    cost_cfg: CostConfig,
    cfg: EnvConfig,
    state: State,
    steps: usize,
}

impl<'a> Env<'a> {
    pub fn new(map: &'a PathLossMap, cost_cfg: CostConfig, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        cost_cfg.validate()?;
        if cfg.length_m as f64 > map.geometry().length_m {
            return Err(Error::config(format!(
                "environment length {} exceeds map tunnel length {}",
                cfg.length_m,
                map.geometry().length_m
            )));
        }
        let state = reset(&cfg, map, &cost_cfg)?;
        Ok(Self {
            map,
            cost_cfg,
            cfg,
            state,
            steps: 0,
        })
    }

    pub fn reset(&mut self) -> Result<State> {
        self.state = reset(&self.cfg, self.map, &self.cost_cfg)?;
        self.steps = 0;
        Ok(self.state)
    }

    pub fn step(&mut self, idx: ActionIndex) -> Result<StepOutcome> {
        let out = step(&self.state, idx, self.map, &self.cost_cfg, &self.cfg)?;
        self.state = out.state;
        self.steps += 1;
        Ok(out)
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step budget for the current episode is used up.
    pub fn truncated(&self) -> bool {
        self.steps >= self.cfg.max_steps_per_episode
    }

    pub fn observe(&self) -> [f64; STATE_DIM] {
        self.cfg.observe(&self.state)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn cost_config(&self) -> &CostConfig {
        &self.cost_cfg
    }

    pub fn map(&self) -> &'a PathLossMap {
        self.map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synth_map, AntennaConfig, ReceiverGrid, SyntheticModelParams, TunnelGeometry};

    fn a(m: [i8; 3]) -> Action {
        Action::new(m).unwrap()
    }

    #[test]
    fn codec_examples() {
        assert_eq!(encode(a([-1, -1, -1])).get(), 0);
        assert_eq!(encode(a([1, 1, 1])).get(), 26);
        assert_eq!(encode(a([0, 0, 0])).get(), 13);
        assert_eq!(decode(ActionIndex::new(0).unwrap()), a([-1, -1, -1]));
        assert_eq!(decode(ActionIndex::new(13).unwrap()), a([0, 0, 0]));
        assert_eq!(decode(ActionIndex::new(26).unwrap()), a([1, 1, 1]));
        assert!(ActionIndex::new(27).is_err());
        assert!(Action::new([2, 0, 0]).is_err());
    }

    #[test]
    fn codec_is_bijective() {
        for i in 0..NUM_ACTIONS {
            let idx = ActionIndex::new(i).unwrap();
            assert_eq!(encode(decode(idx)), idx);
        }
        let mut seen = std::collections::HashSet::new();
        for m1 in -1..=1 {
            for m2 in -1..=1 {
                for m3 in -1..=1 {
                    let act = a([m1, m2, m3]);
                    assert_eq!(decode(encode(act)), act);
                    assert!(seen.insert(encode(act)));
                }
            }
        }
        assert_eq!(seen.len(), NUM_ACTIONS);
    }

    fn small_map() -> PathLossMap {
        let g = TunnelGeometry::with_length(20.0);
        let grid = ReceiverGrid::for_geometry(&g, 0.5).unwrap();
        synth_map(&g, &AntennaConfig::default(), &grid, &SyntheticModelParams::default()).unwrap()
    }

    fn small_env_cfg() -> EnvConfig {
        EnvConfig {
            length_m: 20,
            initial_positions: [0, 7, 14],
            ..Default::default()
        }
    }

    #[test]
    fn step_clips_and_scores() {
        let map = small_map();
        let (cc, ec) = (CostConfig::default(), small_env_cfg());
        let s = reset(&ec, &map, &cc).unwrap();
        let left = encode(a([-1, 0, 0]));
        let out = step(&s, left, &map, &cc, &ec).unwrap();
        assert_eq!(out.state.positions, [0, 7, 14]);

        let stay = step(&s, encode(a([0, 0, 0])), &map, &cc, &ec).unwrap();
        assert_eq!(stay.state, s);
        assert_eq!(stay.reward, -s.cost);

        let up = step(&s, encode(a([1, 1, 1])), &map, &cc, &ec).unwrap();
        assert_eq!(up.state.positions, [1, 8, 15]);
        assert_eq!(up.reward, -combined_cost(&[1, 8, 15], &map, &cc).unwrap());
        assert_eq!(up.done, up.state.cost < ec.terminate_threshold);
    }

    #[test]
    fn reset_is_deterministic_and_duplicate_safe() {
        let map = small_map();
        let cc = CostConfig::default();
        let ec = EnvConfig {
            initial_positions: [0, 0, 0],
            ..small_env_cfg()
        };
        let s1 = reset(&ec, &map, &cc).unwrap();
        let s2 = reset(&ec, &map, &cc).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.cost, combined_cost(&[0], &map, &cc).unwrap());
    }

    #[test]
    fn env_rejects_bad_config() {
        let map = small_map();
        let cc = CostConfig::default();
        assert!(Env::new(&map, cc, EnvConfig::default()).is_err());
        let mut ec = small_env_cfg();
        ec.step_m = 0;
        assert!(Env::new(&map, cc, ec).is_err());
    }

    #[test]
    fn default_initial_positions() {
        assert_eq!(EnvConfig::default().initial_positions, [0, 500, 1000]);
    }
}
