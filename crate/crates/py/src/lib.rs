//! Python bindings for the chemoflow solver.
//!
//! Fields cross the boundary as flat lists of physical samples in
//! row-major order (last axis fastest).

use chemoflow::cli_io::{run_scenario, Command, RunOptions, ScenarioConfig};
use chemoflow::{
    BallSampling, Error, ExponentSet, Grid, MorreyIndex, QuadratureRule, SpectralField,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Divergence(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn grid(dim: usize, points: usize, half_width: f64) -> PyResult<Grid> {
    Grid::new(dim, points, half_width).map_err(to_py)
}

fn field(g: &Grid, values: &[f64]) -> PyResult<SpectralField> {
    SpectralField::from_physical(g, values).map_err(to_py)
}

fn exponent_dict<'py>(py: Python<'py>, e: &ExponentSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("dim", e.dim)?;
    d.set_item("gamma", e.gamma)?;
    for (k, v) in [("p", e.p), ("p1", e.p1), ("q", e.q), ("q1", e.q1), ("r", e.r), ("r1", e.r1), ("n1", e.n1)] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Checks an exponent set; sub-indices are generated when all four are omitted.
#[pyfunction]
#[pyo3(signature = (dim, p, q, r, gamma=0.0, p1=None, q1=None, r1=None, n1=None))]
#[allow(clippy::too_many_arguments)]
fn check_admissible<'py>(
    py: Python<'py>,
    dim: usize,
    p: f64,
    q: f64,
    r: f64,
    gamma: f64,
    p1: Option<f64>,
    q1: Option<f64>,
    r1: Option<f64>,
    n1: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let e = match (p1, q1, r1, n1) {
        (Some(p1), Some(q1), Some(r1), Some(n1)) => ExponentSet { dim, gamma, p, p1, q, q1, r, r1, n1 },
        (None, None, None, None) => chemoflow::suggest_subindices(dim, gamma, p, q, r)
            .map_err(to_py)?
            .ok_or_else(|| PyValueError::new_err("no admissible sub-indices for these p, q, r"))?,
        _ => return Err(PyValueError::new_err("give all of p1, q1, r1, n1 or none")),
    };
    let v = chemoflow::check_admissible(&e);
    let d = PyDict::new(py);
    d.set_item("admissible", v.admissible)?;
    d.set_item("case", v.case.map(|c| c.to_string()))?;
    d.set_item("failures", v.failures)?;
    d.set_item("l_q", v.weights.l_q)?;
    d.set_item("mu_r", v.weights.mu_r)?;
    d.set_item("mu_p", v.weights.mu_p)?;
    d.set_item("exponents", exponent_dict(py, &e)?)?;
    Ok(d)
}

/// Suggested sub-indices `(p1, q1, r1, N1)` as a dict, or `None`.
#[pyfunction]
#[pyo3(signature = (dim, p, q, r, gamma=0.0))]
fn suggest_subindices<'py>(
    py: Python<'py>,
    dim: usize,
    p: f64,
    q: f64,
    r: f64,
    gamma: f64,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    match chemoflow::suggest_subindices(dim, gamma, p, q, r).map_err(to_py)? {
        Some(e) => Ok(Some(exponent_dict(py, &e)?)),
        None => Ok(None),
    }
}

#[pyfunction]
fn beta(x: f64, y: f64) -> PyResult<f64> {
    chemoflow::beta_function(x, y).map_err(to_py)
}

/// Nodes on `[0, 1]` and weights for `int_0^1 (1 - z)^{-a} z^{-b} g(z) dz`.
#[pyfunction]
fn gauss_jacobi(a: f64, b: f64, nodes: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rule = QuadratureRule::new(a, b, nodes).map_err(to_py)?;
    Ok((rule.nodes().to_vec(), rule.weights().to_vec()))
}

/// `e^{t Delta}` applied to samples on the periodic grid `[-L, L)^N`.
#[pyfunction]
fn heat_apply(dim: usize, points: usize, half_width: f64, values: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    let g = grid(dim, points, half_width)?;
    Ok(field(&g, &values)?.heat_apply(t).map_err(to_py)?.to_physical())
}

/// Discrete Morrey norm `||f||_{M^p_{p1}}`; `sampling` is `"default"`,
/// `"dyadic"` or `"exhaustive"`.
#[pyfunction]
#[pyo3(signature = (dim, points, half_width, values, p, p1, sampling="default"))]
fn morrey_norm(
    dim: usize,
    points: usize,
    half_width: f64,
    values: Vec<f64>,
    p: f64,
    p1: f64,
    sampling: &str,
) -> PyResult<f64> {
    let g = grid(dim, points, half_width)?;
    let s = match sampling {
        "default" => BallSampling::default_for(&g),
        "dyadic" => BallSampling::dyadic(&g, 1),
        "exhaustive" => BallSampling::exhaustive(&g),
        other => return Err(PyValueError::new_err(format!("unknown sampling `{other}`"))),
    };
    let idx = MorreyIndex::new(p, p1).map_err(to_py)?;
    Ok(chemoflow::morrey_norm(&field(&g, &values)?, idx, &s))
}

fn command(name: &str) -> PyResult<Command> {
    Ok(match name {
        "solve" => Command::Solve,
        "norms" => Command::Norms,
        "self-similar" => Command::SelfSimilar,
        "stability" => Command::Stability,
        "constants" => Command::Constants,
        "check" => Command::Check,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    })
}

/// Runs a scenario given as TOML text. Returns `(report_json, tables)` where
/// `tables` maps table names to CSV text. Nothing is written to disk.
#[pyfunction]
#[pyo3(signature = (config, cmd, seed=0, quad_nodes=None))]
fn run(py: Python<'_>, config: &str, cmd: &str, seed: u64, quad_nodes: Option<usize>) -> PyResult<(String, Vec<(String, String)>)> {
    let cfg = ScenarioConfig::parse(config).map_err(to_py)?;
    let cmd = command(cmd)?;
    let opts = RunOptions {
        out: None,
        seed,
        quad_nodes,
    };
    let out = py.detach(|| run_scenario(&cfg, cmd, &opts));
    let report = out.report.to_json().map_err(to_py)?;
    let tables = out
        .tables
        .iter()
        .map(|t| Ok((t.name.clone(), t.to_csv().map_err(to_py)?)))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((report, tables))
}

#[pymodule]
fn chemoflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FORMAT_VERSION", chemoflow::cli_io::FORMAT_VERSION)?;
    m.add_function(wrap_pyfunction!(check_admissible, m)?)?;
    m.add_function(wrap_pyfunction!(suggest_subindices, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_jacobi, m)?)?;
    m.add_function(wrap_pyfunction!(heat_apply, m)?)?;
    m.add_function(wrap_pyfunction!(morrey_norm, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
