//! Versioned JSON parameter checkpoints.
//!
//! ```json
//! {
//!   "format": "apopt-nn",
//!   "version": 1,
//!   "kind": "q-dueling",
//!   "meta": null,
//!   "layers": [
//!     {"name": "trunk.0", "in_dim": 4, "out_dim": 64, "activation": "relu",
//!      "weights": [...], "biases": [...]},
//!     ...
//!   ]
//! }
//! ```
//!
//! `weights` is row-major (`out_dim` rows of `in_dim`). Floats are written in
//! shortest round-trip form, so reloading reproduces parameters bit-exactly.
//! Known kinds: `q-plain`, `q-dueling`, `cgan-generator`, `cgan-discriminator`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseLayer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "apopt-nn";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerRecord {
    pub fn from_layer(name: impl Into<String>, layer: &DenseLayer) -> Self {
        Self {
            name: name.into(),
            in_dim: layer.in_dim(),
            out_dim: layer.out_dim(),
            activation: layer.activation(),
            weights: layer.weights().to_vec(),
            biases: layer.biases().to_vec(),
        }
    }

    pub fn to_layer(&self) -> Result<DenseLayer> {
        DenseLayer::from_parts(
            self.in_dim,
            self.out_dim,
            self.weights.clone(),
            self.biases.clone(),
            self.activation,
        )
        .ok_or_else(|| {
            Error::Shape(format!(
                "layer `{}`: {} weights / {} biases do not fit {}x{}",
                self.name,
                self.weights.len(),
                self.biases.len(),
                self.out_dim,
                self.in_dim
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub layers: Vec<LayerRecord>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value, layers: Vec<LayerRecord>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            meta,
            layers,
        }
    }

    pub fn check_version(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Shape(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<DenseLayer> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::Shape(format!("checkpoint missing layer `{name}`")))?
            .to_layer()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Self = serde_json::from_str(&text)?;
        ckpt.check_version()?;
        Ok(ckpt)
    }
}
