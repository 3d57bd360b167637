//! Experiment commands shared by the CLI and the Python bindings.
//!
//! Each command writes machine-readable outputs plus `config.resolved.json`
//! into its output directory. Given the same configuration (seed included)
//! every output file is byte-identical across runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agents::{train, TrainingResult};
use crate::cgan::{
    self, build_dataset, error_report, init_nets, save_dataset, subsample_positions, train_cgan,
    CganPair, ErrorReport, Generator,
};
use crate::channel::{load_map, save_map, synth_map, ApPosition, PathLossMap, PathLossProfile};
use crate::config::RunConfig;
use crate::cost::{evaluate, CostConfig};
use crate::env::{Env, NUM_APS};
use crate::error::{Error, Result};
use crate::hj::{hooke_jeeves, HjResult};
use crate::nn::{Checkpoint, HeadKind};
use crate::stats;

pub const COMPARISON_HEADER: &str = "method,initial_cost,optimized_cost,improvement_pct,x1,x2,x3";
pub const SWEEP_HEADER: &str =
    "alpha,x1,x2,x3,optimized_cost,unoptimized_cost,improvement_pct,f1,f2";

pub fn improvement_pct(initial: f64, optimized: f64) -> f64 {
    100.0 * (initial - optimized) / initial
}

/// Outcome of one optimizer run, in the schema shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub initial_positions: [ApPosition; NUM_APS],
    pub initial_cost: f64,
    pub optimized_positions: [ApPosition; NUM_APS],
    pub optimized_cost: f64,
    pub improvement_pct: f64,
    pub f1: f64,
    pub f2: f64,
    /// Environment steps (agents) or objective evaluations (HJ).
    pub work: u64,
}

impl MethodResult {
    /// Builds the record and re-derives the optimized cost from the returned
    /// positions; a mismatch with the optimizer's own value is an error.
    fn new(
        method: &str,
        seed: Option<u64>,
        initial: ([ApPosition; NUM_APS], f64),
        optimized: ([ApPosition; NUM_APS], f64),
        work: u64,
        map: &PathLossMap,
        cost: &CostConfig,
    ) -> Result<Self> {
        let check = evaluate(&optimized.0, map, cost)?;
        if check.combined != optimized.1 {
            return Err(Error::domain(format!(
                "{method}: reported cost {} differs from recomputed {}",
                optimized.1, check.combined
            )));
        }
        Ok(Self {
            method: method.to_string(),
            seed,
            alpha: cost.alpha,
            initial_positions: initial.0,
            initial_cost: initial.1,
            optimized_positions: optimized.0,
            optimized_cost: optimized.1,
            improvement_pct: improvement_pct(initial.1, optimized.1),
            f1: check.f1,
            f2: check.f2,
            work,
        })
    }

    pub fn from_training(r: &TrainingResult, map: &PathLossMap, cost: &CostConfig) -> Result<Self> {
        Self::new(
            r.method,
            Some(r.seed),
            (r.initial_positions, r.initial_cost),
            (r.best_positions, r.best_cost),
            r.total_steps,
            map,
            cost,
        )
    }

    pub fn from_hj(r: &HjResult, map: &PathLossMap, cost: &CostConfig) -> Result<Self> {
        Self::new(
            r.method,
            None,
            (r.initial_positions, r.initial_cost),
            (r.best_positions, r.best_cost),
            r.evals as u64,
            map,
            cost,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save_resolved(out)
}

/// The map from `map_csv` if given, else the synthetic map for `cfg`.
pub fn obtain_map(cfg: &RunConfig, map_csv: Option<&Path>) -> Result<PathLossMap> {
    let grid = cfg.grid()?;
    match map_csv {
        Some(path) => load_map(path, cfg.geometry, grid),
        None => synth_map(&cfg.geometry, &cfg.antenna, &grid, &cfg.synthetic),
    }
}

/// Writes the synthetic map for every integer AP position to `out/map.csv`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    prepare_out(cfg, out)?;
    let map = obtain_map(cfg, None)?;
    let path = out.join("map.csv");
    save_map(&map, &path)?;
    Ok(path)
}

pub fn run_agent(cfg: &RunConfig, map: &PathLossMap, kind: HeadKind) -> Result<TrainingResult> {
    let mut env = Env::new(map, cfg.cost, cfg.env)?;
    train(&mut env, kind, &cfg.agent)
}

pub fn run_hj(cfg: &RunConfig, map: &PathLossMap) -> Result<HjResult> {
    hooke_jeeves(cfg.env.initial_positions, map, &cfg.cost, &cfg.hj)
}

/// Trains one agent; writes `<method>_result.json`, `<method>_trace.csv`
/// and `<method>_checkpoint.json`.
pub fn cmd_train(cfg: &RunConfig, map: &PathLossMap, kind: HeadKind, out: &Path) -> Result<MethodResult> {
    prepare_out(cfg, out)?;
    let r = run_agent(cfg, map, kind)?;
    save_training(&r, map, &cfg.cost, out)
}

fn save_training(r: &TrainingResult, map: &PathLossMap, cost: &CostConfig, out: &Path) -> Result<MethodResult> {
    let m = MethodResult::from_training(r, map, cost)?;
    m.save(out.join(format!("{}_result.json", r.method)))?;
    r.save_trace(out.join(format!("{}_trace.csv", r.method)))?;
    r.net.to_checkpoint().save(out.join(format!("{}_checkpoint.json", r.method)))?;
    Ok(m)
}

/// Runs the pattern search; writes `hj_result.json` and `hj_history.csv`.
pub fn cmd_hj(cfg: &RunConfig, map: &PathLossMap, out: &Path) -> Result<MethodResult> {
    prepare_out(cfg, out)?;
    let r = run_hj(cfg, map)?;
    save_hj(&r, map, &cfg.cost, out)
}

fn save_hj(r: &HjResult, map: &PathLossMap, cost: &CostConfig, out: &Path) -> Result<MethodResult> {
    let m = MethodResult::from_hj(r, map, cost)?;
    m.save(out.join("hj_result.json"))?;
    write_with(&out.join("hj_history.csv"), |w| {
        writeln!(w, "iteration,x1,x2,x3,cost")?;
        for (i, (x, c)) in r.history.iter().enumerate() {
            writeln!(w, "{i},{},{},{},{c}", x[0], x[1], x[2])?;
        }
        Ok(())
    })?;
    Ok(m)
}

pub fn write_comparison<W: Write>(rows: &[MethodResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    for r in rows {
        let x = r.optimized_positions;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.method, r.initial_cost, r.optimized_cost, r.improvement_pct, x[0], x[1], x[2]
        )?;
    }
    Ok(())
}

/// HJ, DQN and Dueling DQN from the same start; writes `comparison.csv`
/// and each method's own outputs.
pub fn cmd_compare(cfg: &RunConfig, map: &PathLossMap, out: &Path) -> Result<Vec<MethodResult>> {
    prepare_out(cfg, out)?;
    let (hj, (dqn, dueling)) = rayon::join(
        || run_hj(cfg, map),
        || {
            rayon::join(
                || run_agent(cfg, map, HeadKind::Plain),
                || run_agent(cfg, map, HeadKind::Dueling),
            )
        },
    );
    let rows = vec![
        save_hj(&hj?, map, &cfg.cost, out)?,
        save_training(&dqn?, map, &cfg.cost, out)?,
        save_training(&dueling?, map, &cfg.cost, out)?,
    ];
    write_with(&out.join("comparison.csv"), |w| write_comparison(&rows, w))?;
    Ok(rows)
}

pub fn write_sweep<W: Write>(rows: &[MethodResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let x = r.optimized_positions;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha, x[0], x[1], x[2], r.optimized_cost, r.initial_cost, r.improvement_pct, r.f1, r.f2
        )?;
    }
    Ok(())
}

/// One Dueling DQN run per alpha; writes `alpha_sweep.csv`.
pub fn cmd_alpha_sweep(cfg: &RunConfig, map: &PathLossMap, alphas: &[f64], out: &Path) -> Result<Vec<MethodResult>> {
    use rayon::prelude::*;

    prepare_out(cfg, out)?;
    let rows = alphas
        .par_iter()
        .map(|&a| {
            let mut run = cfg.clone();
            run.cost = run.cost.with_alpha(a);
            run.cost.validate()?;
            let r = run_agent(&run, map, HeadKind::Dueling)?;
            MethodResult::from_training(&r, map, &run.cost)
        })
        .collect::<Result<Vec<_>>>()?;
    write_with(&out.join("alpha_sweep.csv"), |w| write_sweep(&rows, w))?;
    Ok(rows)
}

/// Path-loss PDF/CDF (`pl_pdf_cdf.csv`) and per-receiver coverage
/// (`coverage.csv`) for a placement.
pub fn cmd_stats(cfg: &RunConfig, map: &PathLossMap, positions: &[ApPosition], out: &Path) -> Result<()> {
    prepare_out(cfg, out)?;
    let rows = stats::coverage(positions, map, cfg.antenna.tx_power_dbm)?;
    let pl: Vec<f64> = rows.iter().map(|r| r.path_loss_db).collect();
    let bins = stats::histogram(&pl, 1.0)?;
    write_with(&out.join("pl_pdf_cdf.csv"), |w| stats::write_histogram(&bins, w))?;
    write_with(&out.join("coverage.csv"), |w| stats::write_coverage(&rows, w))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CganTrainSummary {
    pub train_profiles: usize,
    pub val_profiles: usize,
    pub baseline_val_mae_db: f64,
    pub final_val_mae_db: f64,
}

/// Trains the surrogate on every `train_stride_m`-th AP position. Writes the
/// dataset cache (`dataset/`), `generator.json`, `discriminator.json`,
/// `cgan_trace.csv`, `cgan_summary.json` and the validation error report.
pub fn cmd_cgan_train(cfg: &RunConfig, map: &PathLossMap, out: &Path) -> Result<(cgan::CganNets, CganTrainSummary)> {
    prepare_out(cfg, out)?;
    let c = &cfg.cgan;
    let sub = subsample_positions(map, c.train_stride_m)?;
    let ds = build_dataset(&sub, c.downsample, c.split_seed, c.val_fraction)?;
    save_dataset(&ds, out.join("dataset"))?;
    let mut nets = init_nets(&ds, c)?;
    let trace = train_cgan(&mut nets, &ds, c)?;
    nets.generator.to_checkpoint().save(out.join("generator.json"))?;
    nets.discriminator.to_checkpoint().save(out.join("discriminator.json"))?;
    write_with(&out.join("cgan_trace.csv"), |w| cgan::train::write_trace(&trace, w))?;
    let eval_pairs = if ds.val.is_empty() { &ds.train } else { &ds.val };
    error_report(&nets, eval_pairs)?.save(out)?;
    let summary = CganTrainSummary {
        train_profiles: ds.train.len(),
        val_profiles: ds.val.len(),
        baseline_val_mae_db: cgan::baseline_masked_mae(eval_pairs)?,
        final_val_mae_db: cgan::mean_masked_mae(&nets, eval_pairs)?,
    };
    write_json(&out.join("cgan_summary.json"), &summary)?;
    Ok((nets, summary))
}

/// Generator prediction for every AP position of `map`, from each
/// profile's coarse subsample.
pub fn augment_map(generator: &Generator, map: &PathLossMap) -> Result<(PathLossMap, ErrorReport)> {
    use rayon::prelude::*;

    let grid = map.grid();
    if generator.n_y() != grid.count {
        return Err(Error::Shape(format!(
            "generator produces {} receivers, map grid has {}",
            generator.n_y(),
            grid.count
        )));
    }
    let positions: Vec<ApPosition> = map.positions().collect();
    let generated = positions
        .par_iter()
        .map(|&p| {
            let pair: CganPair = cgan::dataset::make_pair(map.get(p)?, map.geometry(), grid, generator.knots());
            let y_hat = generator.forward(&pair.coarse, &pair.condition)?;
            let row = cgan::ErrorRow {
                ap_position_m: p,
                mse_db2: cgan::masked_mse(&pair.fine, &y_hat, &pair.mask)?,
                mae_db: cgan::masked_mae(&pair.fine, &y_hat, &pair.mask)?,
            };
            Ok((PathLossProfile::new(p, y_hat), row))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = PathLossMap::new(*map.geometry(), *grid)?;
    let mut rows = Vec::with_capacity(generated.len());
    for (profile, row) in generated {
        out.insert(profile)?;
        rows.push(row);
    }
    Ok((out, ErrorReport::from_rows(rows)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentGap {
    /// Dueling DQN result on the reference map.
    pub reference_cost: f64,
    /// Cost, on the reference map, of the placement found on the augmented map.
    pub augmented_cost: f64,
    pub gap_pct: f64,
    pub threshold_pct: f64,
    pub within_threshold: bool,
}

/// Writes `augmented_map.csv` and the all-position error report; with
/// `check_gap`, also runs Dueling DQN on both maps and writes `augment_gap.json`.
pub fn cmd_cgan_augment(
    cfg: &RunConfig,
    map: &PathLossMap,
    generator: &Generator,
    check_gap: bool,
    out: &Path,
) -> Result<(PathLossMap, Option<AugmentGap>)> {
    prepare_out(cfg, out)?;
    let (aug, report) = augment_map(generator, map)?;
    save_map(&aug, out.join("augmented_map.csv"))?;
    report.save(out)?;
    let gap = if check_gap {
        let (reference, on_aug) = rayon::join(
            || run_agent(cfg, map, HeadKind::Dueling),
            || run_agent(cfg, &aug, HeadKind::Dueling),
        );
        let reference_cost = reference?.best_cost;
        let augmented_cost = evaluate(&on_aug?.best_positions, map, &cfg.cost)?.combined;
        let gap_pct = 100.0 * (augmented_cost - reference_cost) / reference_cost;
        let g = AugmentGap {
            reference_cost,
            augmented_cost,
            gap_pct,
            threshold_pct: cfg.cgan.gap_threshold_pct,
            within_threshold: gap_pct <= cfg.cgan.gap_threshold_pct,
        };
        write_json(&out.join("augment_gap.json"), &g)?;
        Some(g)
    } else {
        None
    };
    Ok((aug, gap))
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<Generator> {
    Generator::from_checkpoint(&Checkpoint::load(path)?)
}
