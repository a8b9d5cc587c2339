//! Python bindings for the network-inference pipeline: datasets, model
//! parameters, EM fitting, AICc model selection, and bootstrap edge calls.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use grnssm::simulate::{BlockFilter, GroundTruth, GroundTruthConfig};
use grnssm::{io, ExpressionDataset, FitConfig, ModelParams};

fn to_py_err(e: grnssm::Error) -> PyErr {
    match e.category() {
        "numerical" => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_to_lists(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_lists(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Replicated time-course expression data.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: ExpressionDataset,
}

#[pymethods]
impl Dataset {
    /// Build from `values[replicate][gene][time]` and gene names.
    #[new]
    fn new(gene_names: Vec<String>, values: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let replicates = values
            .iter()
            .map(|rep| matrix_from_lists(rep, "replicate"))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = ExpressionDataset::new(gene_names, replicates).map_err(to_py_err)?;
        Ok(Dataset { inner })
    }

    /// Load a long-format CSV (`gene,replicate,time,value`).
    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            inner: io::read_csv(&path).map_err(to_py_err)?,
        })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        io::write_csv(&self.inner, &path).map_err(to_py_err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn t(&self) -> usize {
        self.inner.t_len()
    }

    #[getter]
    fn n_reps(&self) -> usize {
        self.inner.n_reps()
    }

    #[getter]
    fn gene_names(&self) -> Vec<String> {
        self.inner.gene_names().to_vec()
    }

    /// Values as `values[replicate][gene][time]`.
    fn values(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.replicates().iter().map(matrix_to_lists).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(p={}, t={}, n_reps={})",
            self.inner.p(),
            self.inner.t_len(),
            self.inner.n_reps()
        )
    }
}

/// Model parameters plus the gene names they were fit against.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Params {
    inner: ModelParams,
    gene_names: Vec<String>,
}

#[pymethods]
impl Params {
    #[staticmethod]
    fn load_json(path: PathBuf) -> PyResult<Self> {
        let (inner, gene_names, _) = io::read_params_json(&path).map_err(to_py_err)?;
        Ok(Params { inner, gene_names })
    }

    fn save_json(&self, path: PathBuf) -> PyResult<()> {
        io::write_params_json(&self.inner, &self.gene_names, None, &path).map_err(to_py_err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn f(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(self.inner.f())
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(self.inner.a())
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(self.inner.z())
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(self.inner.b())
    }

    #[getter]
    fn sigma2_xi(&self) -> f64 {
        self.inner.sigma2_xi()
    }

    #[getter]
    fn q0_diag(&self) -> Vec<f64> {
        self.inner.q0_diag().iter().copied().collect()
    }

    #[getter]
    fn gene_names(&self) -> Vec<String> {
        self.gene_names.clone()
    }

    /// The assembled `(p+k) x (p+k)` graph matrix `[[B, Z], [A, F]]`.
    fn graph(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(grnssm::assemble_graph_matrix(&self.inner).matrix())
    }

    /// Boolean mask of structurally nonzero graph entries.
    fn adjacency(&self) -> Vec<Vec<bool>> {
        let g = grnssm::assemble_graph_matrix(&self.inner);
        let m = g.nonzero_mask();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Params(p={}, k={})", self.inner.p(), self.inner.k())
    }
}

/// Result of one EM run.
#[pyclass]
struct FitOutcome {
    #[pyo3(get)]
    params: Py<Params>,
    #[pyo3(get)]
    loglik_trace: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl FitOutcome {
    #[getter]
    fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace never empty")
    }
}

/// Confidence-interval decision for one graph entry.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Edge {
    #[pyo3(get)]
    source: String,
    #[pyo3(get)]
    target: String,
    #[pyo3(get)]
    block: String,
    #[pyo3(get)]
    estimate: f64,
    #[pyo3(get)]
    lower: f64,
    #[pyo3(get)]
    upper: f64,
    #[pyo3(get)]
    significant: bool,
}

#[pymethods]
impl Edge {
    fn __repr__(&self) -> String {
        format!(
            "Edge({} -> {}, block={}, est={:.4}, ci=[{:.4}, {:.4}], significant={})",
            self.source, self.target, self.block, self.estimate, self.lower, self.upper,
            self.significant
        )
    }
}

/// Number of free interaction parameters `(p + k)^2`.
#[pyfunction]
fn param_count(p: usize, k: usize) -> u64 {
    grnssm::param_count(p, k)
}

/// Largest feasible hidden dimension, or `None` when no `k >= 0` fits.
#[pyfunction]
fn max_hidden_k(p: usize, t: usize, n_reps: usize) -> PyResult<Option<usize>> {
    match grnssm::max_hidden_k(p, t, n_reps) {
        Ok(k) => Ok(Some(k)),
        Err(grnssm::Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(to_py_err(e)),
    }
}

/// Corrected AIC `-2 loglik + 2 P N / (N - P - 1)`.
#[pyfunction]
fn aicc(loglik: f64, n_obs: u64, n_params: u64) -> PyResult<f64> {
    grnssm::aicc(loglik, n_obs, n_params).map_err(to_py_err)
}

/// Simulate a dataset from sparse random ground truth; returns
/// `(dataset, truth_params)`.
#[pyfunction]
#[pyo3(signature = (p, k, t, n_reps, seed, density=0.3, mag_lo=0.3, mag_hi=0.8, diag=0.5, spectral_cap=0.95, sigma2_xi=0.1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    p: usize,
    k: usize,
    t: usize,
    n_reps: usize,
    seed: u64,
    density: f64,
    mag_lo: f64,
    mag_hi: f64,
    diag: f64,
    spectral_cap: f64,
    sigma2_xi: f64,
) -> PyResult<(Dataset, Py<Params>)> {
    let config = GroundTruthConfig {
        density,
        magnitude: (mag_lo, mag_hi),
        diagonal: diag,
        spectral_cap,
        sigma2_xi,
        q0_scale: 1.0,
    };
    let truth = grnssm::random_ground_truth(p, k, &config, seed).map_err(to_py_err)?;
    let (dataset, truth) = grnssm::generate(&truth.params, t, n_reps, seed).map_err(to_py_err)?;
    let gene_names = dataset.gene_names().to_vec();
    let params = Py::new(
        py,
        Params {
            inner: truth.params,
            gene_names,
        },
    )?;
    Ok((Dataset { inner: dataset }, params))
}

/// Fit the model at hidden dimension `k` by EM.
#[pyfunction]
#[pyo3(signature = (dataset, k, max_iter=500, tol=1e-6, seed=0))]
fn fit(
    py: Python<'_>,
    dataset: &Dataset,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> PyResult<FitOutcome> {
    let config = FitConfig { max_iter, tol, seed };
    let result = grnssm::fit(&dataset.inner, k, &config).map_err(to_py_err)?;
    let params = Py::new(
        py,
        Params {
            inner: result.params,
            gene_names: dataset.inner.gene_names().to_vec(),
        },
    )?;
    Ok(FitOutcome {
        params,
        loglik_trace: result.loglik_trace,
        iterations: result.iterations,
        converged: result.converged,
    })
}

/// Marginal log-likelihood of a dataset under given parameters.
#[pyfunction]
fn marginal_loglik(params: &Params, dataset: &Dataset) -> PyResult<f64> {
    grnssm::marginal_loglik(&params.inner, &dataset.inner).map_err(to_py_err)
}

/// Sweep candidate hidden dimensions; returns `(chosen_k, entries)` with
/// entries `(k, loglik, param_count, aicc, converged)` sorted by `k`.
#[pyfunction]
#[pyo3(signature = (dataset, ks, max_iter=500, tol=1e-6, seed=0))]
fn select_k(
    dataset: &Dataset,
    ks: Vec<usize>,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> PyResult<(usize, Vec<(usize, f64, u64, f64, bool)>)> {
    let config = FitConfig { max_iter, tol, seed };
    let report = grnssm::select_k(&dataset.inner, &ks, &config).map_err(to_py_err)?;
    let entries = report
        .entries
        .iter()
        .map(|e| (e.k, e.loglik, e.param_count, e.aicc, e.converged))
        .collect();
    Ok((report.chosen_k, entries))
}

/// Bootstrap the fit and return the per-entry confidence-interval
/// decisions for all `(p + k)^2` graph entries, row-major.
#[pyfunction]
#[pyo3(signature = (dataset, k, nb, level=0.99, seed=0, max_iter=500, tol=1e-6))]
fn bootstrap_edges(
    dataset: &Dataset,
    k: usize,
    nb: usize,
    level: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Vec<Edge>> {
    let config = FitConfig { max_iter, tol, seed };
    let dist = grnssm::bootstrap_fit(&dataset.inner, k, nb, &config).map_err(to_py_err)?;
    let decisions = grnssm::confidence_intervals(&dist, level).map_err(to_py_err)?;
    Ok(decisions
        .into_iter()
        .map(|d| Edge {
            source: d.source,
            target: d.target,
            block: d.block.label().to_string(),
            estimate: d.estimate,
            lower: d.lower,
            upper: d.upper,
            significant: d.significant,
        })
        .collect())
}

/// Score significant edges against ground-truth parameters; returns a
/// dict with confusion counts, TPR, FPR, and F1.
#[pyfunction]
#[pyo3(signature = (truth, edges, block="all"))]
fn recovery_metrics<'py>(
    py: Python<'py>,
    truth: &Params,
    edges: Vec<Py<Edge>>,
    block: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = truth.inner.p();
    let k = truth.inner.k();
    let n = p + k;
    let mut index = std::collections::BTreeMap::new();
    for (i, name) in truth.gene_names.iter().enumerate() {
        index.insert(name.clone(), i);
    }
    for j in 0..k {
        index.insert(format!("TF{}", j + 1), p + j);
    }
    let mut mask = DMatrix::from_element(n, n, false);
    for edge in &edges {
        let e = edge.borrow(py);
        let i = *index
            .get(&e.target)
            .ok_or_else(|| PyValueError::new_err(format!("unknown target '{}'", e.target)))?;
        let j = *index
            .get(&e.source)
            .ok_or_else(|| PyValueError::new_err(format!("unknown source '{}'", e.source)))?;
        if e.significant {
            mask[(i, j)] = true;
        }
    }
    let truth_gt = GroundTruth::from_params(truth.inner.clone());
    let filter = BlockFilter::parse(block).map_err(to_py_err)?;
    let m = grnssm::recovery_metrics(&truth_gt, &mask, filter).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("tp", m.true_positives)?;
    out.set_item("fp", m.false_positives)?;
    out.set_item("tn", m.true_negatives)?;
    out.set_item("fn", m.false_negatives)?;
    out.set_item("tpr", m.tpr)?;
    out.set_item("fpr", m.fpr)?;
    out.set_item("f1", m.f1)?;
    Ok(out)
}

#[pymodule]
fn grnssm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Params>()?;
    m.add_class::<FitOutcome>()?;
    m.add_class::<Edge>()?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(max_hidden_k, m)?)?;
    m.add_function(wrap_pyfunction!(aicc, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_edges, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_metrics, m)?)?;
    Ok(())
}
