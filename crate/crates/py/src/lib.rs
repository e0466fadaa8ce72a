use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use mmpd_core::arena::{self, ArenaConfig, WhiteAction, WorldState, NUM_WHITES};
use mmpd_core::diversity::{run_mmpd, DiversitySchedule};
use mmpd_core::learner::{self, PolicyParams, SacConfig, Skill};
use mmpd_core::metrics::{self, AgreementFeatures};
use mmpd_core::rollout;
use mmpd_core::store::{self, ExperimentConfig, Registry};
use mmpd_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Missing(_) => PyIOError::new_err(e.to_string()),
        Error::Training(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// Hands a serializable value to Python as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn skill(name: &str) -> PyResult<Skill> {
    match name {
        "any" => Ok(Skill::Any),
        "gun" => Ok(Skill::GunOnly),
        "bomb" => Ok(Skill::BombOnly),
        other => Err(PyValueError::new_err(format!(
            "unknown skill {other:?}; expected any, gun or bomb"
        ))),
    }
}

/// One arena episode driven step by step from Python.
#[pyclass]
struct Arena {
    config: ArenaConfig,
    state: WorldState,
}

#[pymethods]
impl Arena {
    #[new]
    #[pyo3(signature = (seed = 0, config = None))]
    fn new(seed: u64, config: Option<&str>) -> PyResult<Self> {
        let config: ArenaConfig = parse(config)?;
        let state = arena::reset(&config, seed).map_err(err)?;
        Ok(Self { config, state })
    }

    fn reset(&mut self, seed: u64) -> PyResult<Vec<f64>> {
        self.state = arena::reset(&self.config, seed).map_err(err)?;
        Ok(self.observe())
    }

    fn observe(&self) -> Vec<f64> {
        arena::observe(&self.state, &self.config).to_vec()
    }

    #[getter]
    fn tick(&self) -> u32 {
        self.state.tick
    }

    /// Returns `(observation, reward, done, outcome)`.
    fn step(
        &mut self,
        py: Python<'_>,
        actions: [usize; NUM_WHITES],
    ) -> PyResult<(Vec<f64>, f64, bool, Py<PyAny>)> {
        let mut decoded = [WhiteAction::Stay; NUM_WHITES];
        for (slot, a) in decoded.iter_mut().zip(actions) {
            *slot = WhiteAction::from_index(a).map_err(err)?;
        }
        let r = arena::step(&self.state, decoded, &self.config).map_err(err)?;
        self.state = r.next_state;
        Ok((self.observe(), r.reward, r.done, to_py(py, &r.outcome)?))
    }
}

/// Trained parameters for both agents.
#[pyclass]
struct Policy {
    params: PolicyParams,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            params: store::load_checkpoint(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (steps, seed = 0, skill = "any", sac = None, arena = None))]
    fn train(
        py: Python<'_>,
        steps: u64,
        seed: u64,
        skill: &str,
        sac: Option<&str>,
        arena: Option<&str>,
    ) -> PyResult<Self> {
        let skill = self::skill(skill)?;
        let sac: SacConfig = parse(sac)?;
        let arena: ArenaConfig = parse(arena)?;
        let params = py
            .detach(|| {
                learner::train::train_with_hook(
                    &sac,
                    &arena,
                    skill,
                    seed,
                    steps,
                    &mut learner::train::NoHook,
                )
            })
            .map_err(err)?
            .0;
        Ok(Self { params })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        store::save_checkpoint(&self.params, &path).map_err(err)
    }

    fn greedy_actions(&self, observation: Vec<f64>) -> PyResult<[u8; NUM_WHITES]> {
        learner::greedy_actions(&self.params, &observation).map_err(err)
    }

    fn distribution(&self, agent: usize, observation: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(
            learner::policy_distribution(&self.params, agent, &observation)
                .map_err(err)?
                .to_vec(),
        )
    }

    #[pyo3(signature = (episodes = 100, seed = 0, arena = None))]
    fn evaluate(
        &self,
        py: Python<'_>,
        episodes: usize,
        seed: u64,
        arena: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let arena: ArenaConfig = parse(arena)?;
        let report = rollout::evaluate(&self.params, &arena, episodes, seed).map_err(err)?;
        to_py(py, &report)
    }

    /// Greedy trajectory logs as dicts.
    #[pyo3(signature = (episodes = 1, seed = 0, arena = None))]
    fn trajectories(
        &self,
        py: Python<'_>,
        episodes: usize,
        seed: u64,
        arena: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let arena: ArenaConfig = parse(arena)?;
        let logs = rollout::greedy_logs(&self.params, &arena, episodes, seed).map_err(err)?;
        to_py(py, &logs)
    }
}

#[pyfunction]
fn frechet_distance(p: Vec<[f64; 2]>, q: Vec<[f64; 2]>) -> PyResult<f64> {
    metrics::frechet_distance(&p, &q).map_err(err)
}

/// Returns the report dict; `sigma=None` uses the median heuristic.
#[pyfunction]
#[pyo3(signature = (p, q, sigma = None))]
fn mmd(
    py: Python<'_>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    sigma: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let p: Vec<_> = p.into_iter().map(AgreementFeatures).collect();
    let q: Vec<_> = q.into_iter().map(AgreementFeatures).collect();
    to_py(py, &metrics::mmd(&p, &q, sigma).map_err(err)?)
}

#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_json()
}

/// Trains a schedule into a registry directory and returns the trained ids.
#[pyfunction]
#[pyo3(signature = (registry, schedule, seed = 0, config = None))]
fn diversify(
    py: Python<'_>,
    registry: PathBuf,
    schedule: &str,
    seed: u64,
    config: Option<&str>,
) -> PyResult<Vec<String>> {
    let schedule: DiversitySchedule =
        serde_json::from_str(schedule).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let config = match config {
        Some(text) => {
            store::parse_experiment_config(&PathBuf::from("<config>"), text).map_err(err)?
        }
        None => ExperimentConfig::default(),
    };
    let trained = py
        .detach(|| {
            let mut reg = Registry::open(&registry)?;
            run_mmpd(&schedule, &config, seed, Some(&mut reg))
        })
        .map_err(err)?;
    Ok(trained.into_iter().map(|p| p.id).collect())
}

#[pyfunction]
fn registry_ids(registry: PathBuf) -> PyResult<Vec<String>> {
    Ok(Registry::open(&registry).map_err(err)?.ids())
}

#[pyfunction]
fn load_policy(registry: PathBuf, id: &str) -> PyResult<Policy> {
    let params = Registry::open(&registry)
        .and_then(|r| r.load_params(id))
        .map_err(err)?;
    Ok(Policy { params })
}

/// Compares two registered policies and returns the report dict.
#[pyfunction]
#[pyo3(signature = (registry, a, b, config = None))]
fn compare(
    py: Python<'_>,
    registry: PathBuf,
    a: &str,
    b: &str,
    config: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let config = match config {
        Some(text) => {
            store::parse_experiment_config(&PathBuf::from("<config>"), text).map_err(err)?
        }
        None => ExperimentConfig::default(),
    };
    let report = py
        .detach(|| {
            let reg = Registry::open(&registry)?;
            let (pa, pb) = (reg.load_policy(a)?, reg.load_policy(b)?);
            metrics::compare_policies(&pa, &pb, &config.arena, &config.compare)
        })
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn mmpd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Arena>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(diversify, m)?)?;
    m.add_function(wrap_pyfunction!(registry_ids, m)?)?;
    m.add_function(wrap_pyfunction!(load_policy, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
