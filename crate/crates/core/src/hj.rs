//! Hooke-Jeeves pattern search over integer AP triples.
//!
//! Exploration visits x1, x2, x3 in order, probing `+step` before `-step`
//! and keeping a probe only on strict improvement. A successful exploration
//! triggers pattern moves `x + (x - base)` until they stop paying off; a
//! failed one halves the step (integer division, floored at `min_step_m`).
//! The search ends when exploration fails at `min_step_m` or the evaluation
//! budget runs out. Probes are clipped to `[0, L]`.

use serde::{Deserialize, Serialize};

use crate::channel::{ApPosition, PathLossMap};
use crate::cost::{combined_cost, CostConfig};
use crate::env::NUM_APS;
use crate::error::{Error, Result};

pub type Triple = [ApPosition; NUM_APS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HjConfig {
    pub initial_step_m: i64,
    pub min_step_m: i64,
    pub max_evals: usize,
}

impl Default for HjConfig {
    fn default() -> Self {
        Self {
            initial_step_m: 64,
            min_step_m: 1,
            max_evals: 20_000,
        }
    }
}

impl HjConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_step_m < 1 || self.initial_step_m < self.min_step_m {
            return Err(Error::config(
                "hj steps must satisfy initial_step_m >= min_step_m >= 1",
            ));
        }
        if self.max_evals == 0 {
            return Err(Error::config("hj max_evals must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjResult {
    pub method: &'static str,
    pub initial_positions: Triple,
    pub initial_cost: f64,
    pub best_positions: Triple,
    pub best_cost: f64,
    pub evals: usize,
    /// Step size when the search stopped.
    pub final_step_m: i64,
    pub budget_exhausted: bool,
    /// Accepted base points, starting with the initial one.
    #[serde(skip)]
    pub history: Vec<(Triple, f64)>,
}

impl HjResult {
    pub fn improvement_pct(&self) -> f64 {
        100.0 * (self.initial_cost - self.best_cost) / self.initial_cost
    }
}

struct BudgetExhausted;

struct Counted<F> {
    f: F,
    evals: usize,
    max_evals: usize,
}

impl<F: FnMut(&Triple) -> Result<f64>> Counted<F> {
    fn eval(&mut self, x: &Triple) -> Result<std::result::Result<f64, BudgetExhausted>> {
        if self.evals >= self.max_evals {
            return Ok(Err(BudgetExhausted));
        }
        self.evals += 1;
        (self.f)(x).map(Ok)
    }
}

/// Pattern search on an arbitrary objective over `[0, length]^3`.
pub fn hooke_jeeves_with<F>(x0: Triple, length: i64, cfg: &HjConfig, objective: F) -> Result<HjResult>
where
    F: FnMut(&Triple) -> Result<f64>,
{
    cfg.validate()?;
    if let Some(x) = x0.iter().find(|&&x| x < 0 || x > length) {
        return Err(Error::domain(format!(
            "initial position {x} outside [0, {length}]"
        )));
    }
    let mut obj = Counted {
        f: objective,
        evals: 0,
        max_evals: cfg.max_evals,
    };
    let f0 = match obj.eval(&x0)? {
        Ok(v) => v,
        Err(BudgetExhausted) => unreachable!("max_evals >= 1"),
    };

    let mut base = x0;
    let mut fb = f0;
    let mut history = vec![(x0, f0)];
    let mut step = cfg.initial_step_m;
    let mut exhausted = false;

    // Returns the explored point and its value, or None if the budget ran out
    // (in which case `best` holds the best point seen during exploration).
    let explore = |obj: &mut Counted<F>, start: Triple, fs: f64, step: i64, best: &mut (Triple, f64)| -> Result<Option<(Triple, f64)>> {
        let mut x = start;
        let mut fx = fs;
        for i in 0..NUM_APS {
            for dir in [1, -1] {
                let mut probe = x;
                probe[i] = (x[i] + dir * step).clamp(0, length);
                if probe == x {
                    continue;
                }
                let Ok(fp) = obj.eval(&probe)? else {
                    return Ok(None);
                };
                if fp < fx {
                    x = probe;
                    fx = fp;
                    if fx < best.1 {
                        *best = (x, fx);
                    }
                    break;
                }
            }
        }
        Ok(Some((x, fx)))
    };

    'outer: loop {
        let mut best = (base, fb);
        let Some((mut x, mut fx)) = explore(&mut obj, base, fb, step, &mut best)? else {
            exhausted = true;
            if best.1 < fb {
                base = best.0;
                fb = best.1;
                history.push((base, fb));
            }
            break;
        };
        if fx < fb {
            loop {
                let prev = base;
                base = x;
                fb = fx;
                history.push((base, fb));

                let mut pattern = base;
                for i in 0..NUM_APS {
                    pattern[i] = (2 * base[i] - prev[i]).clamp(0, length);
                }
                let fp = if pattern == base {
                    fb
                } else {
                    match obj.eval(&pattern)? {
                        Ok(v) => v,
                        Err(BudgetExhausted) => {
                            exhausted = true;
                            break 'outer;
                        }
                    }
                };
                let mut best = (base, fb);
                if fp < best.1 {
                    best = (pattern, fp);
                }
                match explore(&mut obj, pattern, fp, step, &mut best)? {
                    Some((x2, f2)) if f2 < fb => {
                        x = x2;
                        fx = f2;
                    }
                    Some(_) => break,
                    None => {
                        exhausted = true;
                        if best.1 < fb {
                            base = best.0;
                            fb = best.1;
                            history.push((base, fb));
                        }
                        break 'outer;
                    }
                }
            }
        } else if step == cfg.min_step_m {
            break;
        } else {
            step = (step / 2).max(cfg.min_step_m);
        }
    }

    Ok(HjResult {
        method: "hj",
        initial_positions: x0,
        initial_cost: f0,
        best_positions: base,
        best_cost: fb,
        evals: obj.evals,
        final_step_m: step,
        budget_exhausted: exhausted,
        history,
    })
}

/// Pattern search on the combined coverage cost of `map`.
pub fn hooke_jeeves(x0: Triple, map: &PathLossMap, cost_cfg: &CostConfig, cfg: &HjConfig) -> Result<HjResult> {
    cost_cfg.validate()?;
    let length = map.geometry().max_position();
    hooke_jeeves_with(x0, length, cfg, |x| combined_cost(x, map, cost_cfg))
}
