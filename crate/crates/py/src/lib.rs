//! Python bindings: path-loss maps, the placement cost, the MDP, the
//! optimizers and the masked error metrics.

use std::sync::Arc;

use apopt_core::channel::{self, ApPosition};
use apopt_core::config::RunConfig;
use apopt_core::cost::{self, CostConfig};
use apopt_core::env::{self, ActionIndex, EnvConfig, State, NUM_ACTIONS};
use apopt_core::harness::{self, MethodResult};
use apopt_core::nn::HeadKind;
use apopt_core::{cgan, Error};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Run configuration. Missing sections take their defaults.
#[pyclass(name = "Config", module = "apopt", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = RunConfig::from_json(json.unwrap_or("{}")).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::load(path).map_err(to_py)?,
        })
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn length_m(&self) -> i64 {
        self.inner.env.length_m
    }

    #[getter]
    fn initial_positions(&self) -> Vec<ApPosition> {
        self.inner.env.initial_positions.to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(length_m={}, spacing_m={}, alpha={})",
            self.inner.geometry.length_m, self.inner.grid.spacing_m, self.inner.cost.alpha
        )
    }
}

/// Path-loss profiles per AP position over a common receiver grid.
#[pyclass(name = "PathLossMap", module = "apopt", frozen)]
struct PyMap {
    inner: Arc<channel::PathLossMap>,
}

#[pymethods]
impl PyMap {
    /// Synthetic map for `config`, for every integer position or only `positions`.
    #[staticmethod]
    #[pyo3(signature = (config, positions=None))]
    fn synthetic(py: Python<'_>, config: &PyConfig, positions: Option<Vec<ApPosition>>) -> PyResult<Self> {
        let c = &config.inner;
        let map = py
            .detach(|| {
                let grid = c.grid()?;
                match positions {
                    Some(p) => channel::synth_map_at(&c.geometry, &c.antenna, &grid, &c.synthetic, p),
                    None => channel::synth_map(&c.geometry, &c.antenna, &grid, &c.synthetic),
                }
            })
            .map_err(to_py)?;
        Ok(Self { inner: Arc::new(map) })
    }

    /// Reads a map CSV laid out on the grid of `config`.
    #[staticmethod]
    fn load(config: &PyConfig, path: &str) -> PyResult<Self> {
        let c = &config.inner;
        let map = channel::load_map(path, c.geometry, c.grid().map_err(to_py)?).map_err(to_py)?;
        Ok(Self { inner: Arc::new(map) })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        channel::save_map(&self.inner, path).map_err(to_py)
    }

    fn positions(&self) -> Vec<ApPosition> {
        self.inner.positions().collect()
    }

    fn profile(&self, position: ApPosition) -> PyResult<Vec<f64>> {
        Ok(self.inner.get(position).map_err(to_py)?.values.clone())
    }

    /// Receiver coordinates in meters.
    fn receivers(&self) -> Vec<f64> {
        let grid = self.inner.grid();
        (0..grid.count).map(|i| grid.position(i)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PathLossMap(profiles={}, receivers={})",
            self.inner.len(),
            self.inner.grid().count
        )
    }
}

fn cost_config(threshold_db: f64, penalty_coeff: f64, alpha: f64) -> PyResult<CostConfig> {
    let c = CostConfig {
        threshold_db,
        penalty_coeff,
        alpha,
    };
    c.validate().map_err(to_py)?;
    Ok(c)
}

/// Combined penalized cost of a placement.
#[pyfunction]
#[pyo3(signature = (positions, map, threshold_db=30.0, penalty_coeff=10.0, alpha=0.5))]
fn combined_cost(positions: Vec<ApPosition>, map: &PyMap, threshold_db: f64, penalty_coeff: f64, alpha: f64) -> PyResult<f64> {
    let c = cost_config(threshold_db, penalty_coeff, alpha)?;
    cost::combined_cost(&positions, &map.inner, &c).map_err(to_py)
}

/// `(f1, f2, combined)` for a placement.
#[pyfunction]
#[pyo3(signature = (positions, map, threshold_db=30.0, penalty_coeff=10.0, alpha=0.5))]
fn evaluate(
    positions: Vec<ApPosition>,
    map: &PyMap,
    threshold_db: f64,
    penalty_coeff: f64,
    alpha: f64,
) -> PyResult<(f64, f64, f64)> {
    let c = cost_config(threshold_db, penalty_coeff, alpha)?;
    let b = cost::evaluate(&positions, &map.inner, &c).map_err(to_py)?;
    Ok((b.f1, b.f2, b.combined))
}

/// Index in 0..27 of a move triple with entries in {-1, 0, 1}.
#[pyfunction]
fn encode_action(moves: [i8; 3]) -> PyResult<usize> {
    Ok(env::encode(env::Action::new(moves).map_err(to_py)?).get())
}

#[pyfunction]
fn decode_action(index: usize) -> PyResult<[i8; 3]> {
    Ok(env::decode(ActionIndex::new(index).map_err(to_py)?).moves())
}

/// The placement MDP over a shared map.
#[pyclass(name = "Env", module = "apopt")]
struct PyEnv {
    map: Arc<channel::PathLossMap>,
    cost: CostConfig,
    cfg: EnvConfig,
    state: State,
    steps: usize,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(map: &PyMap, config: &PyConfig) -> PyResult<Self> {
        let c = &config.inner;
        // Validates lengths and the start placement against the map.
        let e = env::Env::new(&map.inner, c.cost, c.env).map_err(to_py)?;
        let state = e.state();
        Ok(Self {
            map: Arc::clone(&map.inner),
            cost: c.cost,
            cfg: c.env,
            state,
            steps: 0,
        })
    }

    /// Returns `(positions, cost)` of the initial placement.
    fn reset(&mut self) -> PyResult<([ApPosition; 3], f64)> {
        self.state = env::reset(&self.cfg, &self.map, &self.cost).map_err(to_py)?;
        self.steps = 0;
        Ok((self.state.positions, self.state.cost))
    }

    /// Returns `(positions, cost, reward, done, truncated)`.
    fn step(&mut self, action: usize) -> PyResult<([ApPosition; 3], f64, f64, bool, bool)> {
        let idx = ActionIndex::new(action).map_err(to_py)?;
        let out = env::step(&self.state, idx, &self.map, &self.cost, &self.cfg).map_err(to_py)?;
        self.state = out.state;
        self.steps += 1;
        let truncated = self.steps >= self.cfg.max_steps_per_episode;
        Ok((out.state.positions, out.state.cost, out.reward, out.done, truncated))
    }

    /// Network input for the current state.
    fn observe(&self) -> [f64; 4] {
        self.cfg.observe(&self.state)
    }

    #[getter]
    fn positions(&self) -> [ApPosition; 3] {
        self.state.positions
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.state.cost
    }

    #[classattr]
    fn num_actions() -> usize {
        NUM_ACTIONS
    }
}

/// Outcome of an optimizer run.
#[pyclass(name = "OptimizationResult", module = "apopt", frozen, get_all)]
struct PyOutcome {
    method: String,
    initial_positions: [ApPosition; 3],
    initial_cost: f64,
    positions: [ApPosition; 3],
    cost: f64,
    improvement_pct: f64,
    f1: f64,
    f2: f64,
    work: u64,
}

impl From<MethodResult> for PyOutcome {
    fn from(r: MethodResult) -> Self {
        Self {
            method: r.method,
            initial_positions: r.initial_positions,
            initial_cost: r.initial_cost,
            positions: r.optimized_positions,
            cost: r.optimized_cost,
            improvement_pct: r.improvement_pct,
            f1: r.f1,
            f2: r.f2,
            work: r.work,
        }
    }
}

#[pymethods]
impl PyOutcome {
    fn __repr__(&self) -> String {
        format!(
            "OptimizationResult(method={:?}, cost={:.4}, positions={:?}, improvement_pct={:.2})",
            self.method, self.cost, self.positions, self.improvement_pct
        )
    }
}

/// Hooke-Jeeves pattern search from the configured start placement.
#[pyfunction]
fn hooke_jeeves(py: Python<'_>, map: &PyMap, config: &PyConfig) -> PyResult<PyOutcome> {
    let c = &config.inner;
    let r = py
        .detach(|| harness::run_hj(c, &map.inner).and_then(|r| MethodResult::from_hj(&r, &map.inner, &c.cost)))
        .map_err(to_py)?;
    Ok(r.into())
}

/// Trains a DQN (`method="dqn"`) or Dueling DQN agent and returns the best
/// placement visited.
#[pyfunction]
#[pyo3(signature = (map, config, method="dueling"))]
fn train_agent(py: Python<'_>, map: &PyMap, config: &PyConfig, method: &str) -> PyResult<PyOutcome> {
    let kind = match method {
        "dqn" => HeadKind::Plain,
        "dueling" => HeadKind::Dueling,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let c = &config.inner;
    let r = py
        .detach(|| {
            harness::run_agent(c, &map.inner, kind)
                .and_then(|r| MethodResult::from_training(&r, &map.inner, &c.cost))
        })
        .map_err(to_py)?;
    Ok(r.into())
}

#[pyfunction]
fn masked_mse(y: Vec<f64>, y_hat: Vec<f64>, mask: Vec<f64>) -> PyResult<f64> {
    cgan::masked_mse(&y, &y_hat, &mask).map_err(to_py)
}

#[pyfunction]
fn masked_mae(y: Vec<f64>, y_hat: Vec<f64>, mask: Vec<f64>) -> PyResult<f64> {
    cgan::masked_mae(&y, &y_hat, &mask).map_err(to_py)
}

/// Percentile with linear interpolation at rank `p * (n - 1)`.
#[pyfunction]
fn percentile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    cgan::percentile(&values, p).map_err(to_py)
}

#[pymodule]
fn apopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMap>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(combined_cost, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(encode_action, m)?)?;
    m.add_function(wrap_pyfunction!(decode_action, m)?)?;
    m.add_function(wrap_pyfunction!(hooke_jeeves, m)?)?;
    m.add_function(wrap_pyfunction!(train_agent, m)?)?;
    m.add_function(wrap_pyfunction!(masked_mse, m)?)?;
    m.add_function(wrap_pyfunction!(masked_mae, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    Ok(())
}
