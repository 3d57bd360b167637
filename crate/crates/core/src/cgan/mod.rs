//! Conditional-GAN super-resolution of coarse path-loss profiles.
//!
//! A generator maps a coarse profile `x` (every `downsample`-th receiver)
//! and a condition vector `c` to a fine profile; a sliding-window critic
//! judges local realism. The generator loss is the critic's BCE plus
//! `lambda_l1` times an L1 term restricted to the forward region of the AP.

pub mod dataset;
pub mod metrics;
pub mod nets;
pub mod train;

use serde::{Deserialize, Serialize};

pub use dataset::{
    build_dataset, load_dataset, save_dataset, subsample_positions, CganDataset, CganPair,
};
pub use metrics::{masked_mae, masked_mse, percentile, ErrorReport, ErrorRow, ErrorSummary};
pub use nets::{generator_forward, CganNets, Discriminator, Generator};
pub use train::{
    baseline_masked_mae, discriminator_accuracy, error_report, generator_grad_norms, init_nets,
    mean_masked_mae, train_cgan, EpochStats,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CganConfig {
    /// Fine receivers per coarse sample.
    pub downsample: usize,
    /// Train on AP positions that are multiples of this stride (meters).
    pub train_stride_m: i64,
    pub val_fraction: f64,
    pub split_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub lambda_l1: f64,
    /// BCE target for real windows; below 1 gives one-sided label smoothing.
    pub real_label: f64,
    pub gen_hidden: usize,
    pub disc_hidden: usize,
    pub window: usize,
    pub window_stride: usize,
    pub seed: u64,
    /// Allowed relative cost gap (percent) between agents run on the
    /// augmented and on the reference map.
    pub gap_threshold_pct: f64,
}

impl Default for CganConfig {
    fn default() -> Self {
        Self {
            downsample: 10,
            train_stride_m: 10,
            val_fraction: 0.2,
            split_seed: 0,
            epochs: 200,
            batch_size: 4,
            learning_rate: 1e-4,
            beta1: 0.5,
            lambda_l1: 100.0,
            real_label: 1.0,
            gen_hidden: 128,
            disc_hidden: 64,
            window: 16,
            window_stride: 16,
            seed: 0,
            gap_threshold_pct: 10.0,
        }
    }
}

impl CganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample < 2 {
            return Err(Error::config("cgan downsample must be >= 2"));
        }
        if self.train_stride_m < 1 {
            return Err(Error::config("cgan train_stride_m must be >= 1"));
        }
        if self.batch_size == 0 || self.gen_hidden == 0 || self.disc_hidden == 0 {
            return Err(Error::config("cgan sizes must be >= 1"));
        }
        if self.window == 0 || self.window_stride == 0 {
            return Err(Error::config("cgan window and stride must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("cgan optimizer settings out of range"));
        }
        if !(self.lambda_l1 >= 0.0) || !(0.0..=1.0).contains(&self.real_label) {
            return Err(Error::config("cgan loss settings out of range"));
        }
        Ok(())
    }
}
