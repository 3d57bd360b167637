//! Run configuration: one JSON document with an optional section per module.
//!
//! Every section falls back to its defaults and unknown keys are rejected.
//! The environment length is always taken from the tunnel geometry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Hyperparams;
use crate::cgan::CganConfig;
use crate::channel::{AntennaConfig, ReceiverGrid, SyntheticModelParams, TunnelGeometry};
use crate::cost::CostConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::hj::HjConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub spacing_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { spacing_m: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: TunnelGeometry,
    pub antenna: AntennaConfig,
    pub grid: GridConfig,
    pub synthetic: SyntheticModelParams,
    pub cost: CostConfig,
    pub env: EnvConfig,
    pub agent: Hyperparams,
    pub hj: HjConfig,
    pub cgan: CganConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.resolved()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str::<Self>(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
            .resolved()
    }

    /// Fills derived fields and validates every section.
    pub fn resolved(mut self) -> Result<Self> {
        self.geometry.validate()?;
        self.env.length_m = self.geometry.max_position();
        self.antenna.validate()?;
        self.synthetic.validate()?;
        self.cost.validate()?;
        self.env.validate()?;
        self.agent.validate()?;
        self.hj.validate()?;
        self.cgan.validate()?;
        self.grid()?;
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::config(format!("sweep alpha {a} outside [0, 1]")));
        }
        Ok(self)
    }

    /// Applies a command-line seed to every randomized component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.agent.seed = seed;
        self.cgan.seed = seed;
        self
    }

    pub fn grid(&self) -> Result<ReceiverGrid> {
        ReceiverGrid::for_geometry(&self.geometry, self.grid.spacing_m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes `config.resolved.json` into `dir`.
    pub fn save_resolved(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join("config.resolved.json");
        std::fs::write(&path, self.to_json() + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.env.length_m, 1500);
    }

    #[test]
    fn sections_are_partial_and_length_follows_geometry() {
        let cfg = RunConfig::from_json(
            r#"{"geometry": {"length_m": 100}, "env": {"initial_positions": [0, 50, 100]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.env.length_m, 100);
        assert_eq!(cfg.env.step_m, 1);
        assert_eq!(cfg.geometry.curvature_radius_m, 477.5);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        for text in [
            r#"{"bogus": 1}"#,
            r#"{"cost": {"alpha": 0.5, "beta": 2}}"#,
            r#"{"cost": {"alpha": 2}}"#,
            r#"{"geometry": {"length_m": 100}}"#,
            "not json",
        ] {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn resolved_json_round_trips() {
        let cfg = RunConfig::default().with_seed(9);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
