//! Python bindings: model parsing, deterministic trajectories, stochastic
//! simulation (plain / tracked / limit single-molecule / aggregate), and the
//! deviation bounds.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use moltrack::aggregate::{build_aggregate, check_subconservative};
use moltrack::bounds::{p_bound, single_molecule_bound, tracked_tube_quantities};
use moltrack::fluid::{solve_fluid, FluidSolution};
use moltrack::model::{parse, serialize};
use moltrack::models;
use moltrack::network::{build_augmented, AugmentedNetwork, Status};
use moltrack::paths::survival_curve;
use moltrack::rng::{stream, PURPOSE_EVENTS};
use moltrack::singlemol::{build_limit_rates, SingleMoleculeSimulator};
use moltrack::ssa::{scaled_initial_state, simulate_ssa, simulate_tracked, JumpPath};

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A reaction network with optional tracking statuses and an initial
/// concentration vector.
#[pyclass(name = "Model")]
struct PyModel {
    model: moltrack::model::Model,
}

/// Deterministic trajectory with dense evaluation.
#[pyclass(name = "Fluid")]
struct PyFluid {
    sol: FluidSolution,
}

#[pymethods]
impl PyFluid {
    fn eval(&self, t: f64) -> Vec<f64> {
        self.sol.eval(t)
    }

    #[getter]
    fn min_component(&self) -> f64 {
        self.sol.min_component()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.sol.horizon()
    }
}

/// A status path as (jump_times, status_names); the initial status holds on
/// [0, first jump).
type StatusPathPy = (String, Vec<f64>, Vec<String>);

fn status_path_py(aug: &AugmentedNetwork, p: &JumpPath<Status>) -> StatusPathPy {
    let name = |s: &Status| aug.schema().status_name(*s);
    (
        name(p.initial()),
        p.times().to_vec(),
        p.states().iter().map(name).collect(),
    )
}

impl PyModel {
    fn aug(&self) -> PyResult<AugmentedNetwork> {
        let schema = self
            .model
            .schema
            .as_ref()
            .ok_or_else(|| val_err("model has no tracking statuses"))?;
        build_augmented(&self.model.network, schema).map_err(val_err)
    }

    fn tau(&self, aug: &AugmentedNetwork, status: Option<&str>) -> PyResult<usize> {
        match status {
            Some(n) => aug
                .schema()
                .status_index(n)
                .ok_or_else(|| val_err(format!("unknown status `{n}`"))),
            None => {
                let s = *aug
                    .schema()
                    .tracked_species(self.model.network.dim())
                    .first()
                    .ok_or_else(|| val_err("no tracked species"))?;
                Ok(aug.schema().initial_status_for(s).unwrap())
            }
        }
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            model: parse(text).map_err(val_err)?,
        })
    }

    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        models::by_name(name)
            .map(|model| PyModel { model })
            .ok_or_else(|| val_err(format!("no bundled model named `{name}`")))
    }

    #[getter]
    fn species(&self) -> Vec<String> {
        self.model.network.species().to_vec()
    }

    #[getter]
    fn statuses(&self) -> Vec<String> {
        self.model
            .schema
            .as_ref()
            .map(|s| s.statuses().to_vec())
            .unwrap_or_default()
    }

    #[getter]
    fn init(&self) -> Vec<f64> {
        self.model.init.clone()
    }

    fn __str__(&self) -> String {
        serialize(&self.model)
    }

    /// Structural diagnostics; empty when the model is valid.
    fn validate(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .model
            .network
            .validate()
            .iter()
            .map(|v| v.to_string())
            .collect();
        if let Some(schema) = &self.model.schema {
            out.extend(schema.validate(&self.model.network).iter().map(|v| v.to_string()));
        }
        out
    }

    /// (reaction index, status name) pairs violating sub-conservation.
    fn subconservation_violations(&self) -> PyResult<Vec<(usize, String)>> {
        let schema = self
            .model
            .schema
            .as_ref()
            .ok_or_else(|| val_err("model has no tracking statuses"))?;
        Ok(check_subconservative(&self.model.network, schema)
            .into_iter()
            .map(|(r, t)| (r, schema.statuses()[t].clone()))
            .collect())
    }

    /// Integrate the reaction ODE from the model's initial concentrations.
    #[pyo3(signature = (horizon, step=1e-3))]
    fn fluid(&self, horizon: f64, step: f64) -> PyResult<PyFluid> {
        Ok(PyFluid {
            sol: solve_fluid(&self.model.network, &self.model.init, horizon, step)
                .map_err(run_err)?,
        })
    }

    /// One exact stochastic path: (jump_times, post_states) with the initial
    /// state floor(V * init).
    #[pyo3(signature = (volume, horizon, seed=0, rep=0))]
    fn simulate(
        &self,
        volume: f64,
        horizon: f64,
        seed: u64,
        rep: u64,
    ) -> PyResult<(Vec<u64>, Vec<f64>, Vec<Vec<u64>>)> {
        let x0 = scaled_initial_state(&self.model.init, volume);
        let mut rng = stream(seed, rep, PURPOSE_EVENTS);
        let p = simulate_ssa(&self.model.network, &x0, volume, horizon, &mut rng)
            .map_err(run_err)?;
        Ok((x0, p.times().to_vec(), p.states().to_vec()))
    }

    /// One coupled tracked path: (species path, status path).
    #[pyo3(signature = (volume, horizon, seed=0, rep=0, status=None))]
    #[allow(clippy::type_complexity)]
    fn simulate_tracked(
        &self,
        volume: f64,
        horizon: f64,
        seed: u64,
        rep: u64,
        status: Option<&str>,
    ) -> PyResult<((Vec<u64>, Vec<f64>, Vec<Vec<u64>>), StatusPathPy)> {
        let aug = self.aug()?;
        let tau0 = self.tau(&aug, status)?;
        let x0 = scaled_initial_state(&self.model.init, volume);
        let p = simulate_tracked(&aug, &x0, tau0, volume, horizon, seed, rep).map_err(run_err)?;
        Ok((
            (
                x0,
                p.species.times().to_vec(),
                p.species.states().to_vec(),
            ),
            status_path_py(&aug, &p.status),
        ))
    }

    /// Independent limit single-molecule paths along the fluid trajectory.
    #[pyo3(signature = (horizon, reps, seed=0, status=None, step=1e-3))]
    fn limit_paths(
        &self,
        horizon: f64,
        reps: usize,
        seed: u64,
        status: Option<&str>,
        step: f64,
    ) -> PyResult<Vec<StatusPathPy>> {
        let aug = self.aug()?;
        let tau0 = self.tau(&aug, status)?;
        let sol = solve_fluid(&self.model.network, &self.model.init, horizon, step)
            .map_err(run_err)?;
        let table = build_limit_rates(&aug);
        let sim = SingleMoleculeSimulator::new(&table, &sol).map_err(run_err)?;
        let paths = sim.simulate_batch(tau0, reps, seed, 0).map_err(run_err)?;
        Ok(paths.iter().map(|p| status_path_py(&aug, p)).collect())
    }

    /// Fraction of limit paths still in their initial status at each grid
    /// time.
    #[pyo3(signature = (horizon, reps, grid, seed=0, status=None, step=1e-3))]
    fn survival(
        &self,
        horizon: f64,
        reps: usize,
        grid: Vec<f64>,
        seed: u64,
        status: Option<&str>,
        step: f64,
    ) -> PyResult<Vec<f64>> {
        let aug = self.aug()?;
        let tau0 = self.tau(&aug, status)?;
        let sol = solve_fluid(&self.model.network, &self.model.init, horizon, step)
            .map_err(run_err)?;
        let table = build_limit_rates(&aug);
        let sim = SingleMoleculeSimulator::new(&table, &sol).map_err(run_err)?;
        let paths = sim.simulate_batch(tau0, reps, seed, 0).map_err(run_err)?;
        survival_curve(&paths, Status::Alive(tau0), &grid).map_err(run_err)
    }

    /// Aggregate trajectory (concentrations per grid time).
    #[pyo3(signature = (volume, horizon, grid, seed=0, step=1e-3))]
    fn aggregate(
        &self,
        volume: f64,
        horizon: f64,
        grid: Vec<f64>,
        seed: u64,
        step: f64,
    ) -> PyResult<Vec<Vec<f64>>> {
        let aug = self.aug()?;
        let sol = solve_fluid(&self.model.network, &self.model.init, horizon, step)
            .map_err(run_err)?;
        let table = build_limit_rates(&aug);
        let ens = build_aggregate(&aug, &table, &sol, &self.model.init, volume, seed, 0)
            .map_err(run_err)?;
        Ok(ens.trajectory(&grid))
    }

    /// Deviation bounds at (volume, epsilon, horizon): returns a dict with
    /// the tube-exit bound and, when statuses exist, the single-molecule
    /// expectation bound.
    #[pyo3(signature = (volume, epsilon, horizon, gamma=1.0, p0=0.0, step=1e-3))]
    fn bounds<'py>(
        &self,
        py: Python<'py>,
        volume: f64,
        epsilon: f64,
        horizon: f64,
        gamma: f64,
        p0: f64,
        step: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let sol = solve_fluid(&self.model.network, &self.model.init, horizon, step)
            .map_err(run_err)?;
        let detail = p_bound(&self.model.network, &sol, epsilon, horizon, volume, gamma, p0)
            .map_err(run_err)?;
        let mut report = serde_json::json!({ "tube_exit": detail });
        if let Some(schema) = &self.model.schema {
            let aug = build_augmented(&self.model.network, schema).map_err(val_err)?;
            let table = build_limit_rates(&aug);
            let tracked = tracked_tube_quantities(&aug, &table, &sol, epsilon, horizon, volume)
                .map_err(run_err)?;
            let single = single_molecule_bound(&detail.bound, &tracked, epsilon, sol.min_component())
                .map_err(run_err)?;
            report["tracked_tube"] = serde_json::to_value(tracked).unwrap();
            report["single_molecule_bound"] = serde_json::to_value(single).unwrap();
        }
        json_to_py(py, &report)
    }
}

/// Number of `from -> to` transitions in a status path returned by this
/// module ((initial, times, states) triple).
#[pyfunction]
fn transitions(path: StatusPathPy, from: &str, to: &str) -> u64 {
    let (initial, times, states) = path;
    let mut count = 0;
    let mut cur = initial;
    for (_, s) in times.iter().zip(states) {
        if cur == from && s == to {
            count += 1;
        }
        cur = s;
    }
    count
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use pyo3::types::{PyDict, PyList};
    Ok(match v {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap().into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(a) => {
            let list = PyList::empty(py);
            for item in a {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(o) => {
            let dict = PyDict::new(py);
            for (k, item) in o {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

#[pymodule]
fn moltrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyFluid>()?;
    m.add_function(wrap_pyfunction!(transitions, m)?)?;
    m.add("BUNDLED_MODELS", vec!["si", "sis", "sis_migration", "autophos", "mm_full", "mm_futile"])?;
    Ok(())
}
