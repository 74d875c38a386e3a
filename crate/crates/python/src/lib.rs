//! Python bindings for `mixavg`.
//!
//! Labels and component indices are zero-based on the Python side; the JSON
//! reports keep the one-based labels written by the command-line tool.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mixavg::averaging;
use mixavg::gpcm::{self, CovStructure, EmConfig, InitSpec, SoftAssignment};
use mixavg::merge;
use mixavg::occam;
use mixavg::report::{self, ClusteringReport, PipelineConfig};
use mixavg::simgen;
use mixavg::sweep::{self, SweepConfig};
use mixavg::{Error, Partition};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::AllCellsFailed => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(err: serde_json::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_structure(name: &str) -> PyResult<CovStructure> {
    name.parse::<CovStructure>().map_err(to_py)
}

fn em_config(tol: f64, max_iter: usize) -> PyResult<EmConfig> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(PyValueError::new_err(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(PyValueError::new_err("max_iter must be at least 1"));
    }
    Ok(EmConfig { tol, max_iter })
}

fn rows_of(m: &SoftAssignment) -> Vec<Vec<f64>> {
    m.matrix().row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn soft_from_rows(rows: Vec<Vec<f64>>) -> PyResult<SoftAssignment> {
    let n = rows.len();
    let g = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != g) {
        return Err(PyValueError::new_err("membership rows must all have the same length"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    SoftAssignment::new(DMatrix::from_row_slice(n, g, &flat)).map_err(to_py)
}

fn partition_of(labels: &Bound<'_, PyAny>) -> PyResult<Partition> {
    let mut keys = Vec::new();
    for item in labels.try_iter()? {
        keys.push(item?.str()?.to_string());
    }
    Ok(Partition::from_labels(&keys))
}

/// A numeric data matrix with optional class labels.
#[pyclass(name = "Dataset", module = "mixavg", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: mixavg::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (rows, labels = None))]
    fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let mut inner = mixavg::Dataset::from_rows(&rows).map_err(to_py)?;
        if let Some(labels) = labels {
            inner = inner.with_labels(labels).map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    /// Reads a CSV file with a header row; `label_column` is kept out of the features.
    #[staticmethod]
    #[pyo3(signature = (path, label_column = None))]
    fn load_csv(path: std::path::PathBuf, label_column: Option<&str>) -> PyResult<Self> {
        let inner = mixavg::Dataset::load_csv(path, label_column).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_csv(path, simgen::LABEL_COLUMN).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<String>> {
        self.inner.labels().map(<[String]>::to_vec)
    }

    /// Rows of the data matrix.
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.values().row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Zero-based class of every observation, numbered by first appearance.
    fn label_partition(&self) -> PyResult<Vec<usize>> {
        Ok(self.inner.partition_from_labels().map_err(to_py)?.assignments().to_vec())
    }

    /// Copy with every feature centered and scaled to unit sample variance.
    fn standardize(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.standardize().map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// One fitted mixture.
#[pyclass(name = "FitResult", module = "mixavg", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyFitResult {
    inner: gpcm::FitResult,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn structure(&self) -> &'static str {
        self.inner.structure().name()
    }

    #[getter]
    fn g(&self) -> usize {
        self.inner.g()
    }

    #[getter]
    fn bic(&self) -> f64 {
        self.inner.bic
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    /// Number of free parameters.
    #[getter]
    fn rho(&self) -> usize {
        self.inner.rho
    }

    #[getter]
    fn n_iter(&self) -> usize {
        self.inner.n_iter
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn loglik_trace(&self) -> Vec<f64> {
        self.inner.loglik_trace.clone()
    }

    /// Mixing proportions.
    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.params.pi.clone()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.inner.params.means.iter().map(|m| m.iter().copied().collect()).collect()
    }

    #[getter]
    fn covariances(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner
            .params
            .covariances
            .iter()
            .map(|c| c.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    }

    /// Membership probabilities of every observation in `data`.
    fn posteriors(&self, data: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows_of(&gpcm::e_step(&self.inner.params, &data.inner).map_err(to_py)?))
    }

    /// Zero-based MAP component of every observation in `data`.
    fn classify(&self, data: &PyDataset) -> PyResult<Vec<usize>> {
        let z = gpcm::e_step(&self.inner.params, &data.inner).map_err(to_py)?;
        Ok(averaging::harden(&z).assignments().to_vec())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(structure={}, g={}, bic={:.4})",
            self.inner.structure(),
            self.inner.g(),
            self.inner.bic
        )
    }
}

/// Best fit per (structure, G) cell of a grid.
#[pyclass(name = "SweepResult", module = "mixavg", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PySweepResult {
    inner: sweep::SweepResult,
}

#[pymethods]
impl PySweepResult {
    /// Fits in ascending BIC order.
    #[getter]
    fn entries(&self) -> Vec<PyFitResult> {
        self.inner.entries.iter().cloned().map(|inner| PyFitResult { inner }).collect()
    }

    #[getter]
    fn best(&self) -> PyResult<PyFitResult> {
        let inner = self.inner.best_model().map_err(to_py)?.clone();
        Ok(PyFitResult { inner })
    }

    /// `(structure, G, BIC)` rows in ascending BIC order.
    fn bic_table(&self) -> Vec<(&'static str, usize, f64)> {
        self.inner.entries.iter().map(|f| (f.structure().name(), f.g(), f.bic)).collect()
    }

    /// `(structure, G, reasons)` for every cell that produced no fit.
    #[getter]
    fn failures(&self) -> Vec<(&'static str, usize, Vec<String>)> {
        self.inner
            .failures
            .iter()
            .map(|f| (f.structure.name(), f.g, f.reasons.clone()))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }
}

const CLUSTERINGS: [&str; 4] = ["best", "aap_case_i", "aap_case_ii", "model_average"];

/// Result of averaging the models in Occam's window.
#[pyclass(name = "Report", module = "mixavg", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyReport {
    inner: report::RunReport,
}

impl PyReport {
    fn clustering(&self, name: &str) -> PyResult<&ClusteringReport> {
        let c = &self.inner.clusterings;
        match name {
            "best" => Ok(&c.best),
            "aap_case_i" => Ok(&c.aap_case_i),
            "aap_case_ii" => Ok(&c.aap_case_ii),
            "model_average" => Ok(&c.model_average),
            _ => Err(PyValueError::new_err(format!(
                "unknown clustering `{name}`; expected one of {}",
                CLUSTERINGS.join(", ")
            ))),
        }
    }
}

#[pymethods]
impl PyReport {
    /// Names accepted by `partition`, `posteriors` and `ari`.
    #[staticmethod]
    fn clustering_names() -> Vec<&'static str> {
        CLUSTERINGS.to_vec()
    }

    /// `(structure, G, BIC, weight)` for every model in the window.
    #[getter]
    fn window(&self) -> Vec<(&'static str, usize, f64, f64)> {
        self.inner
            .window
            .iter()
            .map(|w| (w.structure.name(), w.g, w.bic, w.weight))
            .collect()
    }

    #[getter]
    fn window_threshold(&self) -> f64 {
        self.inner.window_threshold
    }

    #[getter]
    fn singleton_window(&self) -> bool {
        self.inner.singleton_window
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    /// `(structure, G, BIC)` rows in ascending BIC order.
    fn bic_table(&self) -> Vec<(&'static str, usize, f64)> {
        self.inner.bic_table.iter().map(|r| (r.structure.name(), r.g, r.bic)).collect()
    }

    /// Zero-based hard labels of the named clustering.
    fn partition(&self, name: &str) -> PyResult<Vec<usize>> {
        Ok(self.clustering(name)?.partition().assignments().to_vec())
    }

    fn posteriors(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.clustering(name)?.soft.clone())
    }

    /// ARI against the known labels, or `None` when the data had none.
    fn ari(&self, name: &str) -> PyResult<Option<f64>> {
        Ok(self.clustering(name)?.ari)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }
}

fn sweep_config(
    structures: Option<Vec<String>>,
    g_min: usize,
    g_max: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PyResult<SweepConfig> {
    let structures = match structures {
        Some(names) => names.iter().map(|s| parse_structure(s)).collect::<PyResult<Vec<_>>>()?,
        None => CovStructure::FITTABLE.to_vec(),
    };
    Ok(SweepConfig {
        structures,
        g_min,
        g_max,
        restarts,
        base_seed: seed,
        em: em_config(tol, max_iter)?,
    })
}

/// Fits one covariance structure with `g` components from a k-means start.
#[pyfunction]
#[pyo3(signature = (data, structure, g, seed = 0, tol = 1e-8, max_iter = 1000))]
fn em_fit(
    py: Python<'_>,
    data: &PyDataset,
    structure: &str,
    g: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyFitResult> {
    let s = parse_structure(structure)?;
    let cfg = em_config(tol, max_iter)?;
    let d = &data.inner;
    let inner = py
        .detach(|| gpcm::em_fit(d, s, g, &InitSpec::KMeans, &cfg, seed))
        .map_err(to_py)?;
    Ok(PyFitResult { inner })
}

/// Fits every (structure, G) cell with `restarts` random starts each.
///
/// Raises `RuntimeError` when no cell could be fitted.
#[pyfunction]
#[pyo3(signature = (data, structures = None, g_min = 1, g_max = 9, restarts = 20, seed = 0, tol = 1e-8, max_iter = 1000))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    data: &PyDataset,
    structures: Option<Vec<String>>,
    g_min: usize,
    g_max: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PyResult<PySweepResult> {
    let cfg = sweep_config(structures, g_min, g_max, restarts, seed, tol, max_iter)?;
    let d = &data.inner;
    let inner = py.detach(|| sweep::run_sweep(d, &cfg)).map_err(to_py)?;
    // an empty sweep is a total fit failure, as in the command-line tool
    inner.best_model().map_err(to_py)?;
    Ok(PySweepResult { inner })
}

/// Averages the models of a finished sweep lying in Occam's window.
#[pyfunction]
#[pyo3(signature = (data, sweep, c = 20.0))]
fn average(py: Python<'_>, data: &PyDataset, sweep: &PySweepResult, c: f64) -> PyResult<PyReport> {
    let (d, s) = (&data.inner, &sweep.inner);
    let inner = py.detach(|| report::average_sweep(d, s, c)).map_err(to_py)?;
    Ok(PyReport { inner })
}

/// Sweep followed by averaging, in one call.
#[pyfunction]
#[pyo3(signature = (data, structures = None, g_min = 1, g_max = 9, restarts = 20, seed = 0, c = 20.0, tol = 1e-8, max_iter = 1000))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    py: Python<'_>,
    data: &PyDataset,
    structures: Option<Vec<String>>,
    g_min: usize,
    g_max: usize,
    restarts: usize,
    seed: u64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyReport> {
    let cfg = PipelineConfig {
        sweep: sweep_config(structures, g_min, g_max, restarts, seed, tol, max_iter)?,
        c,
    };
    let d = &data.inner;
    let inner = py.detach(|| report::run_pipeline(d, &cfg)).map_err(to_py)?;
    Ok(PyReport { inner })
}

/// Posterior model weights from BIC values (lower is better).
#[pyfunction]
fn bma_weights(bics: Vec<f64>) -> PyResult<Vec<f64>> {
    if bics.is_empty() || bics.iter().any(|b| !b.is_finite()) {
        return Err(PyValueError::new_err("need at least one finite BIC"));
    }
    Ok(occam::bma_weights(&bics))
}

/// Adjusted Rand index of two labelings; labels may be any values.
#[pyfunction]
fn adjusted_rand_index(a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>) -> PyResult<f64> {
    mixavg::adjusted_rand_index(&partition_of(a)?, &partition_of(b)?).map_err(to_py)
}

/// Merge of `candidate`'s clusters onto `reference`'s maximizing the ARI.
///
/// Returns `(map, ari)` where `map[k]` is the zero-based reference cluster
/// that candidate cluster `k` joins.
#[pyfunction]
fn best_merge(candidate: &Bound<'_, PyAny>, reference: &Bound<'_, PyAny>) -> PyResult<(Vec<usize>, f64)> {
    let choice = merge::best_merge(&partition_of(candidate)?, &partition_of(reference)?).map_err(to_py)?;
    Ok((choice.map.assignment().to_vec(), choice.ari))
}

/// Zero-based argmax of every membership row; ties go to the lowest index.
#[pyfunction]
fn harden(z: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    Ok(averaging::harden(&soft_from_rows(z)?).assignments().to_vec())
}

/// Two triangles of uniform points flanking two Gaussian clusters (n = 500).
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn gen_scenario3(seed: u64) -> PyDataset {
    PyDataset {
        inner: simgen::gen_scenario3(seed).dataset,
    }
}

/// `k` spherical Gaussian clusters spaced `separation` apart, optionally with
/// one uniform noise column.
#[pyfunction]
#[pyo3(signature = (k, p, n_per, separation, seed = 0, noise = false))]
fn simulate_separated(k: usize, p: usize, n_per: usize, separation: f64, seed: u64, noise: bool) -> PyResult<PyDataset> {
    let mut spec = simgen::separated_clusters_spec(k, p, n_per, separation);
    if noise {
        spec = simgen::with_noise_column(spec, -1.0, 1.0);
    }
    let sim = simgen::generate(&spec, seed).map_err(to_py)?;
    Ok(PyDataset { inner: sim.dataset })
}

/// Names of all covariance structures, and of those that can be fitted.
#[pyfunction]
#[pyo3(signature = (fittable_only = false))]
fn structures(fittable_only: bool) -> Vec<&'static str> {
    let all: &[CovStructure] = if fittable_only {
        &CovStructure::FITTABLE
    } else {
        &CovStructure::ALL
    };
    all.iter().map(|s| s.name()).collect()
}

#[pymodule]
#[pyo3(name = "mixavg")]
pub fn mixavg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PySweepResult>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(em_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(average, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(bma_weights, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(best_merge, m)?)?;
    m.add_function(wrap_pyfunction!(harden, m)?)?;
    m.add_function(wrap_pyfunction!(gen_scenario3, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_separated, m)?)?;
    m.add_function(wrap_pyfunction!(structures, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
