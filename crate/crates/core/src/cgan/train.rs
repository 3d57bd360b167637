use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{CganDataset, CganPair};
use super::metrics::{masked_mae, masked_mse, ErrorReport, ErrorRow};
use super::nets::{CganNets, NetShape};
use super::CganConfig;
use crate::error::{Error, Result};
use crate::nn::{MlpCache, OptimizerConfig, OptimizerKind, OptimizerState, Parameters};

pub const TRACE_HEADER: &str = "epoch,d_loss,g_adv,g_l1,val_mae_db";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean critic loss (real + fake BCE) over the epoch's batches.
    pub d_loss: f64,
    /// Mean adversarial generator loss.
    pub g_adv: f64,
    /// Mean masked L1 (dB) on training pairs, before weighting.
    pub g_l1: f64,
    /// Masked MAE on the validation split after the epoch; NaN without one.
    pub val_mae_db: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean BCE of logits against `label`, and its gradient per logit.
fn bce(logits: &[f64], label: f64) -> (f64, Vec<f64>) {
    let n = logits.len() as f64;
    let loss = logits
        .iter()
        .map(|&l| label * softplus(-l) + (1.0 - label) * softplus(l))
        .sum::<f64>()
        / n;
    let grad = logits.iter().map(|&l| (sigmoid(l) - label) / n).collect();
    (loss, grad)
}

/// Masked L1 in dB and its gradient with respect to the prediction.
fn l1(y: &[f64], y_hat: &[f64], mask: &[f64]) -> (f64, Vec<f64>) {
    let n: f64 = mask.iter().sum();
    let loss = y
        .iter()
        .zip(y_hat)
        .zip(mask)
        .map(|((a, b), m)| m * (a - b).abs())
        .sum::<f64>()
        / n;
    let grad = y
        .iter()
        .zip(y_hat)
        .zip(mask)
        .map(|((a, b), m)| {
            let d = b - a;
            let sign = if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
            m * sign / n
        })
        .collect();
    (loss, grad)
}

/// Fresh networks sized for `ds`; inputs are standardized with the mean and
/// standard deviation of the training coarse profiles.
pub fn init_nets(ds: &CganDataset, cfg: &CganConfig) -> Result<CganNets> {
    if ds.train.is_empty() {
        return Err(Error::domain("training split is empty"));
    }
    let vals = ds.train.iter().flat_map(|p| p.coarse.iter().copied());
    let n = (ds.train.len() * ds.n_x()) as f64;
    let mean = vals.clone().sum::<f64>() / n;
    let std = (vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let shape = NetShape {
        n_y: ds.n_y(),
        downsample: ds.downsample,
        n_c: ds.n_c(),
        gen_hidden: cfg.gen_hidden,
        disc_hidden: cfg.disc_hidden,
        window: cfg.window,
        stride: cfg.window_stride,
        in_offset: mean,
        in_scale: if std > 0.0 { std } else { 1.0 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(CganNets::new(&shape, cfg.lambda_l1, &mut rng))
}

/// Alternating critic / generator updates for `cfg.epochs` epochs.
pub fn train_cgan(nets: &mut CganNets, ds: &CganDataset, cfg: &CganConfig) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::domain("training split is empty"));
    }
    if nets.generator.n_y() != ds.n_y() || nets.generator.n_x() != ds.n_x() {
        return Err(Error::Shape("networks do not match the dataset".into()));
    }
    // Offset from the init seed so shuffling does not replay the weight draws.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_cafe);
    let opt_cfg = OptimizerConfig {
        kind: OptimizerKind::Adam,
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        ..OptimizerConfig::default()
    };
    let mut g_opt = OptimizerState::new(opt_cfg);
    let mut d_opt = OptimizerState::new(opt_cfg);
    let mut g_grads = nets.generator.gradients();
    let mut d_grads = nets.discriminator.gradients();
    let mut d_scratch = nets.discriminator.gradients();
    let mut gen_caches: Vec<MlpCache> = Vec::new();
    let (mut real_caches, mut fake_caches) = (Vec::new(), Vec::new());
    let real = cfg.real_label;
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut adv_sum, mut l1_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let bsz = chunk.len() as f64;
            gen_caches.resize_with(chunk.len(), MlpCache::default);
            // The generator is not updated until after the critic step, so
            // these outputs and caches serve both steps.
            let fakes: Vec<Vec<f64>> = chunk
                .iter()
                .zip(gen_caches.iter_mut())
                .map(|(&i, cache)| {
                    let p = &ds.train[i];
                    nets.generator.forward_cached(&p.coarse, &p.condition, &p.upsampled, cache)
                })
                .collect();

            d_grads.fill_zero();
            let mut d_loss = 0.0;
            for (&i, fake) in chunk.iter().zip(&fakes) {
                let p = &ds.train[i];
                let d = &nets.discriminator;
                let (lr, gr) = bce(&d.scores_cached(&p.fine, &p.upsampled, &p.condition, &mut real_caches), real);
                let (lf, gf) = bce(&d.scores_cached(fake, &p.upsampled, &p.condition, &mut fake_caches), 0.0);
                d_loss += lr + lf;
                let gr: Vec<f64> = gr.iter().map(|g| g / bsz).collect();
                let gf: Vec<f64> = gf.iter().map(|g| g / bsz).collect();
                d.backward_cached(p.fine.len(), &real_caches, &gr, &mut d_grads);
                d.backward_cached(fake.len(), &fake_caches, &gf, &mut d_grads);
            }
            d_opt.step(&mut nets.discriminator, &d_grads)?;

            g_grads.fill_zero();
            let (mut adv, mut rec) = (0.0, 0.0);
            for ((&i, fake), cache) in chunk.iter().zip(&fakes).zip(&gen_caches) {
                let p = &ds.train[i];
                let d = &nets.discriminator;
                let (la, ga) = bce(&d.scores_cached(fake, &p.upsampled, &p.condition, &mut fake_caches), 1.0);
                let grad_adv = d.backward_cached(fake.len(), &fake_caches, &ga, &mut d_scratch);
                let (ll, gl) = l1(&p.fine, fake, &p.mask);
                adv += la;
                rec += ll;
                let grad: Vec<f64> = grad_adv
                    .iter()
                    .zip(&gl)
                    .map(|(a, l)| (a + nets.lambda_l1 * l) / bsz)
                    .collect();
                nets.generator.backward(cache, &grad, &mut g_grads);
            }
            g_opt.step(&mut nets.generator, &g_grads)?;

            d_sum += d_loss / bsz;
            adv_sum += adv / bsz;
            l1_sum += rec / bsz;
            batches += 1;
        }
        let nb = batches as f64;
        let val_mae_db = if ds.val.is_empty() {
            f64::NAN
        } else {
            mean_masked_mae(nets, &ds.val)?
        };
        let stats = EpochStats {
            epoch,
            d_loss: d_sum / nb,
            g_adv: adv_sum / nb,
            g_l1: l1_sum / nb,
            val_mae_db,
        };
        if epoch % 20 == 0 {
            log::info!(
                "cgan epoch {epoch}: d {:.4} adv {:.4} l1 {:.5} val mae {:.5}",
                stats.d_loss,
                stats.g_adv,
                stats.g_l1,
                stats.val_mae_db
            );
        }
        trace.push(stats);
    }
    Ok(trace)
}

pub fn write_trace<W: std::io::Write>(trace: &[EpochStats], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in trace {
        writeln!(w, "{},{},{},{},{}", s.epoch, s.d_loss, s.g_adv, s.g_l1, s.val_mae_db)?;
    }
    Ok(())
}

/// Mean over pairs of the per-pair masked MAE of the generator.
pub fn mean_masked_mae(nets: &CganNets, pairs: &[CganPair]) -> Result<f64> {
    let errs = pairs
        .par_iter()
        .map(|p| masked_mae(&p.fine, &nets.generator.forward(&p.coarse, &p.condition)?, &p.mask))
        .collect::<Result<Vec<_>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Same statistic for the plain linear upsampling of each coarse input.
pub fn baseline_masked_mae(pairs: &[CganPair]) -> Result<f64> {
    let errs = pairs
        .iter()
        .map(|p| masked_mae(&p.fine, &p.upsampled, &p.mask))
        .collect::<Result<Vec<_>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Per-AP masked MSE/MAE of the generator plus aggregate statistics.
pub fn error_report(nets: &CganNets, pairs: &[CganPair]) -> Result<ErrorReport> {
    let rows = pairs
        .par_iter()
        .map(|p| {
            let y_hat = nets.generator.forward(&p.coarse, &p.condition)?;
            Ok(ErrorRow {
                ap_position_m: p.ap_position_m,
                mse_db2: masked_mse(&p.fine, &y_hat, &p.mask)?,
                mae_db: masked_mae(&p.fine, &y_hat, &p.mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorReport::from_rows(rows)
}

/// Fraction of windows the critic labels correctly (real > 0, fake <= 0).
pub fn discriminator_accuracy(nets: &CganNets, pairs: &[CganPair]) -> Result<f64> {
    let (mut right, mut total) = (0usize, 0usize);
    for p in pairs {
        let fake = nets.generator.forward(&p.coarse, &p.condition)?;
        let d = &nets.discriminator;
        for s in d.scores(&p.fine, &p.upsampled, &p.condition) {
            right += (s > 0.0) as usize;
            total += 1;
        }
        for s in d.scores(&fake, &p.upsampled, &p.condition) {
            right += (s <= 0.0) as usize;
            total += 1;
        }
    }
    Ok(right as f64 / total as f64)
}

/// L2 norms of the generator-parameter gradients of the adversarial term
/// and of the weighted L1 term, for one pair.
pub fn generator_grad_norms(nets: &CganNets, pair: &CganPair) -> (f64, f64) {
    let mut cache = MlpCache::default();
    let fake = nets
        .generator
        .forward_cached(&pair.coarse, &pair.condition, &pair.upsampled, &mut cache);
    let (_, ga) = bce(
        &nets.discriminator.scores(&fake, &pair.upsampled, &pair.condition),
        1.0,
    );
    let mut scratch = nets.discriminator.gradients();
    let grad_adv = nets
        .discriminator
        .backward(&fake, &pair.upsampled, &pair.condition, &ga, &mut scratch);
    let (_, gl) = l1(&pair.fine, &fake, &pair.mask);
    let grad_l1: Vec<f64> = gl.iter().map(|g| nets.lambda_l1 * g).collect();
    let norm = |g: &[f64]| {
        let mut grads = nets.generator.gradients();
        nets.generator.backward(&cache, g, &mut grads);
        grads.l2_norm()
    };
    (norm(&grad_adv), norm(&grad_l1))
}
