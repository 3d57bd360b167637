//! Penalized coverage costs.
//!
//! Every receiver's path loss is penalized above the tolerated threshold,
//! `pl + lambda * max(0, pl - th)`. `f1` averages the penalized values,
//! `f2` takes their maximum, and the placement objective is
//! `alpha * f1 + (1 - alpha) * f2` over the min-combined coverage.

use serde::{Deserialize, Serialize};

use crate::channel::{ApPosition, PathLossMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Maximum tolerated path loss th, uniform across receivers.
    pub threshold_db: f64,
    /// Penalty coefficient lambda, uniform across receivers.
    pub penalty_coeff: f64,
    /// Convex weight between the average (f1) and worst-case (f2) costs.
    pub alpha: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            threshold_db: 30.0,
            penalty_coeff: 10.0,
            alpha: 0.5,
        }
    }
}

impl CostConfig {
    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.penalty_coeff >= 0.0 && self.penalty_coeff.is_finite()) {
            return Err(Error::config("penalty coefficient must be >= 0"));
        }
        if !self.threshold_db.is_finite() {
            return Err(Error::config("threshold must be finite"));
        }
        Ok(())
    }
}

#[inline]
pub fn penalized(pl: f64, cfg: &CostConfig) -> f64 {
    pl + cfg.penalty_coeff * (pl - cfg.threshold_db).max(0.0)
}

/// Mean of the penalized path loss.
pub fn f1(pl: &[f64], cfg: &CostConfig) -> Result<f64> {
    if pl.is_empty() {
        return Err(Error::domain("f1 of an empty path-loss vector"));
    }
    let sum: f64 = pl.iter().map(|&v| penalized(v, cfg)).sum();
    Ok(sum / pl.len() as f64)
}

/// Maximum of the penalized path loss.
pub fn f2(pl: &[f64], cfg: &CostConfig) -> Result<f64> {
    if pl.is_empty() {
        return Err(Error::domain("f2 of an empty path-loss vector"));
    }
    Ok(pl
        .iter()
        .map(|&v| penalized(v, cfg))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Both cost terms plus their combination, with a count of receivers whose
/// combined path loss breaks the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub f1: f64,
    pub f2: f64,
    pub combined: f64,
    pub violations: usize,
}

/// Convex combination of `f1` and `f2` over an already min-combined vector.
pub fn combine(f1: f64, f2: f64, cfg: &CostConfig) -> f64 {
    cfg.alpha * f1 + (1.0 - cfg.alpha) * f2
}

/// Cost of the AP placement `positions` under `map`.
pub fn combined_cost(positions: &[ApPosition], map: &PathLossMap, cfg: &CostConfig) -> Result<f64> {
    evaluate(positions, map, cfg).map(|b| b.combined)
}

/// Single pass over the receivers: min-combine, penalize, sum and max.
///
/// Produces exactly the values of `f1`/`f2` applied to `combine_min`, without
/// materializing the combined vector.
pub fn evaluate(
    positions: &[ApPosition],
    map: &PathLossMap,
    cfg: &CostConfig,
) -> Result<CostBreakdown> {
    let profiles = positions
        .iter()
        .map(|&x| map.get(x).map(|p| p.values.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let (first, rest) = profiles
        .split_first()
        .ok_or_else(|| Error::domain("at least one AP position is required"))?;

    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut violations = 0;
    for (i, &v0) in first.iter().enumerate() {
        let mut pl = v0;
        for p in rest {
            let v = p[i];
            if v < pl {
                pl = v;
            }
        }
        if pl > cfg.threshold_db {
            violations += 1;
        }
        let q = penalized(pl, cfg);
        sum += q;
        max = max.max(q);
    }
    let f1 = sum / first.len() as f64;
    Ok(CostBreakdown {
        f1,
        f2: max,
        combined: combine(f1, max, cfg),
        violations,
    })
}
