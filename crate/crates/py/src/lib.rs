//! Python bindings for the `hyperphase` crate.
//!
//! Errors surface as `HyperphaseError` with the message prefixed by the
//! machine-readable category (`"capacity: ..."`).

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hyperphase::branching::{self, OffspringLaw};
use hyperphase::combinat::{self, SubsetRank};
use hyperphase::experiments::{self, RunSpec};
use hyperphase::exploration::{self as ex, Backend, ExplorationConfig, Outcome, Source};
use hyperphase::hypergraph::{self as hg, HypergraphSample, SampleMethod};
use hyperphase::model;

create_exception!(pyhyperphase, HyperphaseError, PyException);

fn err(e: hyperphase::Error) -> PyErr {
    HyperphaseError::new_err(format!("{}: {e}", e.category()))
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for hyperphase::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

#[pyfunction]
fn binom(a: u64, b: u64) -> PyResult<u64> {
    combinat::binom(a, b).py_err()
}

/// Colex rank of a sorted list of distinct 0-indexed vertices.
#[pyfunction]
fn rank_colex(set: Vec<u32>) -> PyResult<u64> {
    Ok(combinat::rank_colex(&set).py_err()?.rank)
}

#[pyfunction]
fn unrank_colex(rank: u64, r: u32) -> PyResult<Vec<u32>> {
    combinat::unrank_colex(SubsetRank { rank, r }).py_err()
}

#[pyfunction]
fn threshold_p(n: u64, k: u32, j: u32) -> PyResult<f64> {
    Ok(model::threshold_p(n, k, j).py_err()?.value)
}

#[pyfunction]
fn giant_fraction(c: f64, k: u32) -> PyResult<f64> {
    model::giant_fraction(c, k).py_err()
}

#[pyfunction]
fn bdl_constants<'py>(py: Python<'py>, k: u32, j: u32, eps: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = model::bdl_constants(k, j, eps).py_err()?;
    let d = PyDict::new(py);
    d.set_item("k", c.k)?;
    d.set_item("j", c.j)?;
    d.set_item("eps", c.eps)?;
    d.set_item("c_ell", c.c_ell)?;
    d.set_item("c_dagger", c.c_dagger)?;
    d.set_item("c_hat", c.c_hat)?;
    d.set_item("c_star", c.c_star)?;
    d.set_item("c_main", c.c_main)?;
    d.set_item("c_final", c.c_final)?;
    d.set_item("alpha_max", c.alpha_max)?;
    Ok(d)
}

/// A k-uniform hypergraph with edges stored as colex ranks.
#[pyclass(name = "Hypergraph", frozen)]
struct PyHypergraph {
    inner: HypergraphSample,
}

#[pymethods]
impl PyHypergraph {
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }

    #[getter]
    fn edges(&self) -> Vec<u64> {
        self.inner.edges.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn to_text(&self) -> PyResult<String> {
        self.inner.to_text().py_err()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: HypergraphSample::from_text(text).py_err()?,
        })
    }

    /// j-tuple components as `(groups, uncovered)`; groups hold j-set ranks.
    fn components(&self, j: u32) -> PyResult<(Vec<Vec<u64>>, u64)> {
        let part = hg::components_oracle(&self.inner, j).py_err()?;
        Ok((part.groups(), part.uncovered))
    }

    fn __len__(&self) -> usize {
        self.inner.edges.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Hypergraph(n={}, k={}, edges={})",
            self.inner.n,
            self.inner.k,
            self.inner.edges.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (n, k, p, seed=0, method="sparse"))]
fn sample(n: u32, k: u32, p: f64, seed: u64, method: &str) -> PyResult<PyHypergraph> {
    let method: SampleMethod = method.parse().py_err()?;
    Ok(PyHypergraph {
        inner: hg::sample(n, k, p, seed, method).py_err()?,
    })
}

/// Outcome of one exploration run.
#[pyclass(name = "Exploration", frozen, get_all)]
struct PyExploration {
    edges_found: u64,
    components: Vec<Vec<u64>>,
    largest_component: u64,
    max_frontier: u64,
    queries: u64,
    completed: bool,
    /// `(t, rank, outcome)` with outcome one of "0", "1", "accepted", "discarded".
    trace: Vec<(u64, u64, String)>,
    discovered_edges: Vec<(u64, u64)>,
    /// `(t, [Delta_0, ..., Delta_{j-1}])`
    checkpoints: Vec<(u64, Vec<u64>)>,
}

#[pymethods]
impl PyExploration {
    fn __repr__(&self) -> String {
        format!(
            "Exploration(edges_found={}, largest_component={}, max_frontier={}, queries={}, completed={})",
            self.edges_found, self.largest_component, self.max_frontier, self.queries, self.completed
        )
    }
}

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Zero => "0",
        Outcome::One => "1",
        Outcome::Accepted => "accepted",
        Outcome::Discarded => "discarded",
    }
}

impl From<ex::ExplorationResult> for PyExploration {
    fn from(r: ex::ExplorationResult) -> Self {
        Self {
            edges_found: r.summary.edges_found,
            largest_component: r.summary.largest_component,
            max_frontier: r.summary.max_frontier,
            queries: r.summary.queries,
            completed: r.summary.completed,
            trace: r
                .trace
                .records
                .iter()
                .map(|q| (q.t, q.rank, outcome_label(q.outcome).to_string()))
                .collect(),
            discovered_edges: r.discovered_edges,
            checkpoints: r.checkpoints.into_iter().map(|c| (c.t, c.profile.deltas)).collect(),
            components: r.components,
        }
    }
}

/// Runs one exploration. Outcomes come from `bits` when given, otherwise
/// from Bernoulli(p) draws.
#[pyfunction]
#[pyo3(signature = (
    alg, n, k, j, p=None, seed=0, backend="exact", budget=None, checkpoints=None,
    neutral_rule="pseudocode", start_order="random", bits=None,
))]
#[allow(clippy::too_many_arguments)]
fn explore(
    py: Python<'_>,
    alg: &str,
    n: u32,
    k: u32,
    j: u32,
    p: Option<f64>,
    seed: u64,
    backend: &str,
    budget: Option<u64>,
    checkpoints: Option<Vec<u64>>,
    neutral_rule: &str,
    start_order: &str,
    bits: Option<Vec<bool>>,
) -> PyResult<PyExploration> {
    let source = match (bits, p) {
        (Some(b), _) => Source::Bits(b),
        (None, Some(p)) => Source::Bernoulli { p },
        (None, None) => return Err(HyperphaseError::new_err("invalid-input: give p or bits")),
    };
    let backend: Backend = backend.parse().py_err()?;
    let mut cfg = ExplorationConfig::new(alg.parse().py_err()?, backend, n, k, j, source, seed);
    cfg.budget = budget;
    cfg.checkpoints = checkpoints.unwrap_or_default();
    cfg.neutral_rule = neutral_rule.parse().py_err()?;
    cfg.start_order = start_order.parse().py_err()?;
    let res = py.detach(|| ex::run_exploration(cfg)).py_err()?;
    Ok(res.into())
}

#[pyfunction]
#[pyo3(signature = (r, m, q, cap=branching::DEFAULT_CAP, seed=0))]
fn simulate_total(r: u64, m: u64, q: f64, cap: u64, seed: u64) -> PyResult<(u64, bool, u64)> {
    let law = OffspringLaw::new(r, m, q).py_err()?;
    let o = branching::simulate_total(&law, cap, seed).py_err()?;
    Ok((o.tau, o.capped, o.generations))
}

/// `(fraction, radius)` of runs reaching the cap.
#[pyfunction]
#[pyo3(signature = (r, m, q, cap, runs, seed=0))]
fn survival_estimate(py: Python<'_>, r: u64, m: u64, q: f64, cap: u64, runs: u64, seed: u64) -> PyResult<(f64, f64)> {
    let law = OffspringLaw::new(r, m, q).py_err()?;
    let s = py.detach(|| branching::survival_estimate(&law, cap, runs, seed)).py_err()?;
    Ok((s.fraction, s.radius))
}

#[pyfunction]
#[pyo3(signature = (r, m, q, tol=1e-12))]
fn pgf_survival(r: u64, m: u64, q: f64, tol: f64) -> PyResult<f64> {
    branching::pgf_survival(&OffspringLaw::new(r, m, q).py_err()?, tol).py_err()
}

/// `(lhs, lhs_radius, rhs, rhs_radius, holds)`
#[pyfunction]
#[pyo3(signature = (r, m, q, s, runs, seed=0))]
fn domination_check(
    py: Python<'_>,
    r: u64,
    m: u64,
    q: f64,
    s: u64,
    runs: u64,
    seed: u64,
) -> PyResult<(f64, f64, f64, f64, bool)> {
    let d = py.detach(|| branching::domination_check(r, m, q, s, runs, seed)).py_err()?;
    Ok((d.lhs, d.lhs_radius, d.rhs, d.rhs_radius, d.holds))
}

/// Runs a JSON spec and returns the records as JSON lines.
#[pyfunction]
#[pyo3(signature = (spec_json, workers=None))]
fn run_sweep(py: Python<'_>, spec_json: &str, workers: Option<usize>) -> PyResult<Vec<String>> {
    let spec = RunSpec::from_json(spec_json).py_err()?;
    let records = py.detach(|| experiments::run(&spec, workers)).py_err()?;
    let mut buf = Vec::new();
    experiments::write_jsonl(&records, &mut buf).py_err()?;
    Ok(String::from_utf8(buf)
        .expect("serde_json writes UTF-8")
        .lines()
        .map(str::to_string)
        .collect())
}

#[pymodule]
fn pyhyperphase(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HyperphaseError", m.py().get_type::<HyperphaseError>())?;
    m.add_class::<PyHypergraph>()?;
    m.add_class::<PyExploration>()?;
    m.add_function(wrap_pyfunction!(binom, m)?)?;
    m.add_function(wrap_pyfunction!(rank_colex, m)?)?;
    m.add_function(wrap_pyfunction!(unrank_colex, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_p, m)?)?;
    m.add_function(wrap_pyfunction!(giant_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(bdl_constants, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_total, m)?)?;
    m.add_function(wrap_pyfunction!(survival_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(pgf_survival, m)?)?;
    m.add_function(wrap_pyfunction!(domination_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
