//! The `tenseg` Python extension module.
//!
//! Exposes structure generation, the equilibrium solver, modal analysis,
//! dataset generation, and surrogate training. Matrix-valued results come
//! back as plain lists, so the module has no Python-side dependencies.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tenseg_core::dataset::{self, Dataset, SamplingSpec};
use tenseg_core::modal::ModalResult;
use tenseg_core::nalgebra::DVector;
use tenseg_core::statics::{self, EquilibriumState, LoadCase, SolverConfig, GRAVITY_ACCEL};
use tenseg_core::surrogate::{self, EvalReport, MlpModel, TrainConfig};
use tenseg_core::topology::{self, Structure, StructureKind};

fn err(e: tenseg_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &tenseg_core::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// A tensegrity structure: nodes, members, materials, and actuation map.
#[pyclass(name = "Structure", module = "tenseg", frozen)]
pub struct PyStructure {
    inner: Structure,
}

#[pymethods]
impl PyStructure {
    /// Builds one of the built-in benchmarks: "dbar", "prism", or "lander".
    #[staticmethod]
    fn benchmark(kind: &str) -> PyResult<Self> {
        let kind: StructureKind = kind.parse().map_err(err)?;
        Ok(Self {
            inner: topology::benchmark(kind).map_err(err)?,
        })
    }

    /// Planar D-bar: four bars in a rhombus braced by two diagonal strings.
    #[staticmethod]
    #[pyo3(signature = (bar_length = topology::DEFAULT_DBAR_BAR_LENGTH))]
    fn dbar(bar_length: f64) -> PyResult<Self> {
        Ok(Self {
            inner: topology::generate_dbar(bar_length).map_err(err)?,
        })
    }

    /// Triangular prism: two twisted triangles joined by bars and strings.
    #[staticmethod]
    #[pyo3(signature = (
        radius = topology::DEFAULT_PRISM_RADIUS,
        height = topology::DEFAULT_PRISM_HEIGHT,
        twist = topology::DEFAULT_PRISM_TWIST,
    ))]
    fn prism(radius: f64, height: f64, twist: f64) -> PyResult<Self> {
        Ok(Self {
            inner: topology::generate_prism(radius, height, twist).map_err(err)?,
        })
    }

    /// Six-bar lander: three orthogonal bar pairs in a string octahedron.
    #[staticmethod]
    #[pyo3(signature = (
        bar_length = topology::DEFAULT_LANDER_BAR_LENGTH,
        separation_ratio = topology::DEFAULT_LANDER_SEPARATION_RATIO,
    ))]
    fn lander(bar_length: f64, separation_ratio: f64) -> PyResult<Self> {
        Ok(Self {
            inner: topology::generate_lander(bar_length, separation_ratio).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Structure::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    /// SHA-256 of the canonical JSON form; stable identity for artifacts.
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_bars(&self) -> usize {
        self.inner.n_bars()
    }

    #[getter]
    fn n_strings(&self) -> usize {
        self.inner.n_strings()
    }

    #[getter]
    fn n_members(&self) -> usize {
        self.inner.n_members()
    }

    #[getter]
    fn n_actuated(&self) -> usize {
        self.inner.n_actuated()
    }

    /// Node coordinates as an n×3 list of lists.
    fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n_nodes())
            .map(|i| {
                let p = self.inner.nodes.position(i);
                vec![p.x, p.y, p.z]
            })
            .collect()
    }

    fn bars(&self) -> Vec<(usize, usize)> {
        self.inner
            .connectivity
            .bars()
            .iter()
            .map(|&[i, j]| (i, j))
            .collect()
    }

    fn strings(&self) -> Vec<(usize, usize)> {
        self.inner
            .connectivity
            .strings()
            .iter()
            .map(|&[i, j]| (i, j))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Structure(kind={:?}, nodes={}, bars={}, strings={})",
            self.inner.kind.name(),
            self.inner.n_nodes(),
            self.inner.n_bars(),
            self.inner.n_strings()
        )
    }
}

/// A converged equilibrium: coordinates, member forces, solver diagnostics.
#[pyclass(name = "Equilibrium", module = "tenseg", frozen)]
pub struct PyEquilibrium {
    inner: EquilibriumState,
}

#[pymethods]
impl PyEquilibrium {
    /// Equilibrium node coordinates as an n×3 list of lists.
    fn coordinates(&self) -> Vec<Vec<f64>> {
        let m = self.inner.nodes.matrix();
        (0..m.ncols())
            .map(|i| m.column(i).iter().copied().collect())
            .collect()
    }

    fn member_forces(&self) -> Vec<f64> {
        self.inner.member_forces.as_slice().to_vec()
    }

    fn force_densities(&self) -> Vec<f64> {
        self.inner.force_densities.as_slice().to_vec()
    }

    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths.as_slice().to_vec()
    }

    fn rest_lengths(&self) -> Vec<f64> {
        self.inner.rest_lengths.as_slice().to_vec()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn potential_energy(&self) -> f64 {
        self.inner.potential_energy
    }

    fn __repr__(&self) -> String {
        format!(
            "Equilibrium(residual={:.3e}, iterations={})",
            self.inner.residual_norm, self.inner.iterations
        )
    }
}

/// Natural frequencies and mode shapes about an equilibrium.
#[pyclass(name = "Modal", module = "tenseg", frozen)]
pub struct PyModal {
    inner: ModalResult,
}

#[pymethods]
impl PyModal {
    /// Generalized eigenvalues (rad²/s²), ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.as_slice().to_vec()
    }

    /// Mode frequencies √|λ| in rad/s, in eigenvalue order.
    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies.as_slice().to_vec()
    }

    fn hz_frequencies(&self) -> Vec<f64> {
        self.inner.hz_frequencies.as_slice().to_vec()
    }

    /// Non-zero-mode frequencies, ascending.
    fn nonzero_frequencies(&self) -> Vec<f64> {
        self.inner.sorted_nonzero_frequencies().as_slice().to_vec()
    }

    #[getter]
    fn zero_mode_count(&self) -> usize {
        self.inner.zero_mode_count
    }

    /// Mass-orthonormal mode shapes, one row per mode (free DOFs only).
    fn mode_shapes(&self) -> Vec<Vec<f64>> {
        self.inner
            .mode_shapes
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Modal(modes={}, zero={})",
            self.inner.eigenvalues.len(),
            self.inner.zero_mode_count
        )
    }
}

fn load_for(s: &Structure, gravity: bool) -> LoadCase {
    if gravity {
        LoadCase::with_gravity(s.n_nodes(), GRAVITY_ACCEL)
    } else {
        LoadCase::free(s.n_nodes())
    }
}

/// Finds the equilibrium configuration after changing the actuated cables'
/// rest lengths by `dl` (meters, one entry per actuated cable).
#[pyfunction]
#[pyo3(signature = (structure, dl, gravity = false, tolerance = None))]
fn solve(
    structure: &PyStructure,
    dl: Vec<f64>,
    gravity: bool,
    tolerance: Option<f64>,
) -> PyResult<PyEquilibrium> {
    let s = &structure.inner;
    let mut config = SolverConfig::default();
    if let Some(tol) = tolerance {
        config.tolerance = tol;
    }
    let state = statics::solve_equilibrium(s, &DVector::from_vec(dl), &load_for(s, gravity), &config)
        .map_err(err)?;
    Ok(PyEquilibrium { inner: state })
}

/// Solves equilibrium, then returns the natural frequencies about it.
#[pyfunction]
#[pyo3(signature = (structure, dl, gravity = false))]
fn modal(structure: &PyStructure, dl: Vec<f64>, gravity: bool) -> PyResult<PyModal> {
    let s = &structure.inner;
    let state = statics::solve_equilibrium(
        s,
        &DVector::from_vec(dl),
        &load_for(s, gravity),
        &SolverConfig::default(),
    )
    .map_err(err)?;
    Ok(PyModal {
        inner: tenseg_core::modal::modal_analysis(s, &state).map_err(err)?,
    })
}

/// A normalized supervised-learning dataset (inputs: cable actuations,
/// outputs: coordinates, forces, frequencies).
#[pyclass(name = "Dataset", module = "tenseg", frozen)]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.inner.n_inputs()
    }

    #[getter]
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }

    /// (coordinate, force, frequency) column counts of each output row.
    #[getter]
    fn layout(&self) -> (usize, usize, usize) {
        let l = &self.inner.layout;
        (l.coords, l.forces, l.frequencies)
    }

    fn inputs(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.inputs)
    }

    fn outputs(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.outputs)
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json`; returns both paths.
    fn save(&self, dir: PathBuf, stem: &str) -> PyResult<(PathBuf, PathBuf)> {
        dataset::save(&self.inner, &dir, stem).map_err(err)
    }

    #[staticmethod]
    fn load(csv_path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataset::load(&csv_path).map_err(err)?,
        })
    }

    /// Seeded random row split into (train, test).
    #[pyo3(signature = (train_fraction = 0.8, seed = 0))]
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
        let (a, b) = dataset::split(&self.inner, train_fraction, seed).map_err(err)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(samples={}, inputs={}, outputs={})",
            self.inner.len(),
            self.inner.n_inputs(),
            self.inner.n_outputs()
        )
    }
}

/// Samples actuations uniformly, solves every sample, and assembles the
/// normalized dataset. `ranges` defaults to the benchmark ranges for the
/// structure's family.
#[pyfunction]
#[pyo3(signature = (structure, n, seed, ranges = None))]
fn generate_dataset(
    structure: &PyStructure,
    n: usize,
    seed: u64,
    ranges: Option<Vec<(f64, f64)>>,
) -> PyResult<PyDataset> {
    let s = &structure.inner;
    let ranges = match ranges {
        Some(r) => r,
        None => dataset::benchmark_ranges(s.kind).map_err(err)?,
    };
    let spec = SamplingSpec::new(ranges, n, seed).map_err(err)?;
    Ok(PyDataset {
        inner: dataset::generate(s, &spec, &SolverConfig::default()).map_err(err)?,
    })
}

/// A trained feedforward surrogate network.
#[pyclass(name = "Model", module = "tenseg", frozen)]
pub struct PyModel {
    inner: MlpModel,
    train_config: Option<TrainConfig>,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.inner.layer_dims.clone()
    }

    #[getter]
    fn n_parameters(&self) -> usize {
        self.inner.n_parameters()
    }

    fn predict(&self, input: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = self.inner.forward(&DVector::from_vec(input)).map_err(err)?;
        Ok(out.as_slice().to_vec())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner
            .save(&path, self.train_config.as_ref())
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, train_config) = MlpModel::load(&path).map_err(err)?;
        Ok(Self {
            inner,
            train_config,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dims={:?}, parameters={})",
            self.inner.layer_dims,
            self.inner.n_parameters()
        )
    }
}

fn build_config(
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> TrainConfig {
    TrainConfig {
        learning_rate,
        epochs,
        batch_size,
        seed,
        ..TrainConfig::default()
    }
}

/// Trains a ReLU network with Adam on the full dataset.
#[pyfunction]
#[pyo3(signature = (
    data, hidden = None, learning_rate = 0.01, epochs = 200, batch_size = 32, seed = 0
))]
fn train_surrogate(
    data: &PyDataset,
    hidden: Option<Vec<usize>>,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> PyResult<PyModel> {
    let hidden = hidden.unwrap_or_else(|| vec![64, 64, 64]);
    let cfg = build_config(learning_rate, epochs, batch_size, seed);
    let model = surrogate::train(&data.inner, &hidden, &cfg).map_err(err)?;
    Ok(PyModel {
        inner: model,
        train_config: Some(cfg),
    })
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mse_total", r.mse_total)?;
    d.set_item("mse_coords", r.mse_coords)?;
    d.set_item("mse_forces", r.mse_forces)?;
    d.set_item("mse_freqs", r.mse_freqs)?;
    d.set_item("trials", r.trials)?;
    d.set_item("per_trial_total", r.per_trial_total.clone())?;
    d.set_item("train_time_s", r.train_time_s)?;
    d.set_item("test_time_s", r.test_time_s)?;
    Ok(d)
}

/// Scores a model on a dataset; returns per-channel mean squared errors.
#[pyfunction]
fn evaluate_surrogate<'py>(
    py: Python<'py>,
    model: &PyModel,
    data: &PyDataset,
) -> PyResult<Bound<'py, PyDict>> {
    let report = surrogate::evaluate(&model.inner, &data.inner).map_err(err)?;
    report_dict(py, &report)
}

/// Repeats the split/train/test protocol `trials` times with derived seeds
/// and returns mean errors across trials.
#[pyfunction]
#[pyo3(signature = (
    data, trials = 20, hidden = None, learning_rate = 0.01, epochs = 200,
    batch_size = 32, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn run_surrogate_trials<'py>(
    py: Python<'py>,
    data: &PyDataset,
    trials: usize,
    hidden: Option<Vec<usize>>,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let hidden = hidden.unwrap_or_else(|| vec![64, 64, 64]);
    let cfg = build_config(learning_rate, epochs, batch_size, seed);
    let report = surrogate::run_trials(&data.inner, &hidden, &cfg, trials).map_err(err)?;
    report_dict(py, &report)
}

#[pymodule]
fn tenseg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStructure>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_class::<PyModal>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(modal, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(run_surrogate_trials, m)?)?;
    Ok(())
}
