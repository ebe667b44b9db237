//! Python bindings for the anchorite simulator.
//!
//! ```python
//! import anchorite
//! d = anchorite.Deployment.uniform(1000, seed=1, beacons="corners")
//! obs = anchorite.generate_observations(d, '{"kind": "boolean_clouds", "intensity": 30}', 2000, seed=1)
//! cm = anchorite.cumulant_matrix(obs)
//! g = anchorite.build_proximity_graph(cm, anchorite.compute_kn(len(d), 1.2))
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use anchorite::analytic;
use anchorite::fields::BooleanClouds;
use anchorite::pipeline;
use anchorite::{BeaconSpec, Error, FieldModel, Point2, RngStream, ScenarioConfig};

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else if matches!(e, Error::Io { .. }) {
        PyIOError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_beacons(spec: &Bound<'_, PyAny>) -> PyResult<BeaconSpec> {
    if let Ok(s) = spec.extract::<String>() {
        return match s.as_str() {
            "corners" => Ok(BeaconSpec::Corners),
            other => Err(PyValueError::new_err(format!("unknown beacon token: {other}"))),
        };
    }
    let pts: Vec<(f64, f64)> = spec.extract()?;
    Ok(BeaconSpec::Explicit(pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect()))
}

fn check_index(i: usize, n: usize) -> PyResult<()> {
    if i < n {
        Ok(())
    } else {
        Err(PyIndexError::new_err(format!("index {i} out of range for {n} sensors")))
    }
}

/// Sensor positions in the unit square; beacons are sensors with known
/// positions.
#[pyclass(name = "Deployment", frozen)]
struct PyDeployment(anchorite::Deployment);

#[pymethods]
impl PyDeployment {
    /// `n` uniform sensors plus beacons (`"corners"` or a list of `(x, y)`).
    #[staticmethod]
    #[pyo3(signature = (n, seed, beacons=None))]
    fn uniform(n: usize, seed: u64, beacons: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let d = anchorite::deploy_sensors(n, &RngStream::new(seed).derive("deploy")).map_err(to_py)?;
        let spec = match beacons {
            Some(b) => parse_beacons(b)?,
            None => BeaconSpec::Explicit(vec![]),
        };
        Ok(Self(anchorite::place_beacons(&d, &spec).map_err(to_py)?))
    }

    /// Explicit positions; `beacon_ids` index into them.
    #[new]
    #[pyo3(signature = (positions, beacon_ids=Vec::new()))]
    fn new(positions: Vec<(f64, f64)>, beacon_ids: Vec<usize>) -> PyResult<Self> {
        let pts = positions.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        Ok(Self(anchorite::Deployment::new(pts, beacon_ids).map_err(to_py)?))
    }

    #[getter]
    fn positions(&self) -> Vec<(f64, f64)> {
        self.0.sensors().iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn beacon_ids(&self) -> Vec<usize> {
        self.0.beacon_ids().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Binary records, one row per sensor and one column per time step.
#[pyclass(name = "ObservationMatrix", frozen)]
struct PyObservationMatrix(anchorite::ObservationMatrix);

#[pymethods]
impl PyObservationMatrix {
    /// Rows given as strings of `0`/`1`.
    #[new]
    fn new(rows: Vec<String>) -> PyResult<Self> {
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        Ok(Self(anchorite::ObservationMatrix::from_bit_strings(&refs).map_err(to_py)?))
    }

    #[getter]
    fn n_sensors(&self) -> usize {
        self.0.n_sensors()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps()
    }

    fn get(&self, i: usize, t: usize) -> PyResult<bool> {
        check_index(i, self.0.n_sensors())?;
        if t >= self.0.n_steps() {
            return Err(PyIndexError::new_err(format!("step {t} out of range")));
        }
        Ok(self.0.get(i, t))
    }

    fn mean(&self, i: usize) -> PyResult<f64> {
        check_index(i, self.0.n_sensors())?;
        Ok(self.0.mean(i))
    }
}

/// Pairwise moments and cumulants of an observation matrix.
#[pyclass(name = "CumulantMatrix", frozen)]
struct PyCumulantMatrix(anchorite::CumulantMatrix);

#[pymethods]
impl PyCumulantMatrix {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn lag_window(&self) -> usize {
        self.0.lag_window()
    }

    fn mean(&self, i: usize) -> PyResult<f64> {
        check_index(i, self.0.n())?;
        Ok(self.0.mean(i))
    }

    fn kappa(&self, i: usize, j: usize) -> PyResult<f64> {
        check_index(i.max(j), self.0.n())?;
        Ok(self.0.kappa(i, j))
    }

    fn c2(&self, i: usize, j: usize) -> PyResult<f64> {
        check_index(i.max(j), self.0.n())?;
        Ok(self.0.c2(i, j))
    }

    fn c2_lagged(&self, i: usize, j: usize) -> PyResult<Option<f64>> {
        check_index(i.max(j), self.0.n())?;
        Ok(self.0.c2_lagged(i, j))
    }
}

/// Undirected proximity graph.
#[pyclass(name = "ProximityGraph", frozen)]
struct PyProximityGraph(anchorite::ProximityGraph);

#[pymethods]
impl PyProximityGraph {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        check_index(i, self.0.n())?;
        Ok(self.0.neighbors(i).to_vec())
    }

    /// Hop counts from each source to every node; `None` when unreachable.
    fn hop_distances(&self, sources: Vec<usize>) -> PyResult<Vec<Vec<Option<u32>>>> {
        Ok(anchorite::hop_distances(&self.0, &sources).map_err(to_py)?.hops)
    }
}

#[pyfunction]
fn compute_kn(n: usize, c: f64) -> PyResult<usize> {
    anchorite::compute_kn(n, c).map_err(to_py)
}

#[pyfunction]
fn lens_area(dist: f64, radius: f64) -> PyResult<f64> {
    analytic::lens_area(dist, radius).map_err(to_py)
}

/// Covariance of the Boolean model with radii uniform on `[radius_min, radius_max]`.
#[pyfunction]
#[pyo3(signature = (dist, intensity, radius_min=0.0, radius_max=0.2))]
fn boolean_covariance(dist: f64, intensity: f64, radius_min: f64, radius_max: f64) -> PyResult<f64> {
    let m = BooleanClouds::new(intensity, radius_min, radius_max);
    m.validate().map_err(to_py)?;
    analytic::boolean_covariance(dist, &m).map_err(to_py)
}

/// Simulates `n_steps` observations; `model` is the JSON field-model object.
#[pyfunction]
fn generate_observations(
    py: Python<'_>,
    d: &PyDeployment,
    model: &str,
    n_steps: usize,
    seed: u64,
) -> PyResult<PyObservationMatrix> {
    let model: FieldModel =
        serde_json::from_str(model).map_err(|e| PyValueError::new_err(format!("bad field model: {e}")))?;
    let stream = RngStream::new(seed).derive("field");
    py.detach(|| anchorite::generate_observations(&d.0, &model, n_steps, &stream))
        .map(PyObservationMatrix)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (obs, lag=0))]
fn cumulant_matrix(py: Python<'_>, obs: &PyObservationMatrix, lag: usize) -> PyResult<PyCumulantMatrix> {
    py.detach(|| anchorite::cumulant_matrix(&obs.0, lag))
        .map(PyCumulantMatrix)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (cm, k, use_lagged=false))]
fn build_proximity_graph(cm: &PyCumulantMatrix, k: usize, use_lagged: bool) -> PyResult<PyProximityGraph> {
    anchorite::build_proximity_graph(&cm.0, k, use_lagged)
        .map(PyProximityGraph)
        .map_err(to_py)
}

/// Least-squares position from ranges; returns `(x, y, residual, converged)`.
#[pyfunction]
fn multilaterate(beacons: Vec<(f64, f64)>, dists: Vec<f64>) -> PyResult<(f64, f64, f64, bool)> {
    let bs: Vec<Point2> = beacons.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
    let m = anchorite::multilaterate(&bs, &dists).map_err(to_py)?;
    Ok((m.position.x, m.position.y, m.residual, m.converged))
}

/// Runs the full pipeline for a JSON config file and returns the
/// localization summary.
#[pyfunction]
#[pyo3(signature = (config_path, out=None, threads=None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    config_path: PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScenarioConfig::load(&config_path).map_err(to_py)?;
    let out = pipeline::output_dir(&cfg, out.as_deref());
    let manifest = py
        .detach(|| pipeline::with_threads(threads, || pipeline::run_pipeline(&cfg, &out)))
        .map_err(to_py)?
        .map_err(to_py)?;
    let report = manifest.localization.expect("pipeline localizes");
    let dict = PyDict::new(py);
    dict.set_item("n_nodes", report.n_nodes)?;
    dict.set_item("n_localized", report.n_localized)?;
    dict.set_item("median_error", report.median_error)?;
    dict.set_item("interior_median_error", report.interior_median_error)?;
    dict.set_item("boundary_median_error", report.boundary_median_error)?;
    dict.set_item("output_dir", out)?;
    Ok(dict)
}

#[pymodule]
#[pyo3(name = "anchorite")]
fn anchorite_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDeployment>()?;
    m.add_class::<PyObservationMatrix>()?;
    m.add_class::<PyCumulantMatrix>()?;
    m.add_class::<PyProximityGraph>()?;
    m.add_function(wrap_pyfunction!(compute_kn, m)?)?;
    m.add_function(wrap_pyfunction!(lens_area, m)?)?;
    m.add_function(wrap_pyfunction!(boolean_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(generate_observations, m)?)?;
    m.add_function(wrap_pyfunction!(cumulant_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(build_proximity_graph, m)?)?;
    m.add_function(wrap_pyfunction!(multilaterate, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
