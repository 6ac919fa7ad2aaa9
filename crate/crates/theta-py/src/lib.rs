//! Python bindings. Structured values cross the boundary as JSON strings in
//! the same schema the CLI reads and writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::Value;
use theta_selftest::bell::{
    evaluate_witness, exclusivity_graph, reference_realization, witness, Realization, ScenarioName,
};
use theta_selftest::graph::{fractional_packing, independence_number, GraphJson};
use theta_selftest::{self_test, verify_selftest_claim, Error, SelfTestReport, WeightedGraph};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Input(_) | Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_json(s: &str) -> Result<Value, Error> {
    serde_json::from_str(s).map_err(|e| Error::Input(format!("invalid JSON: {e}")))
}

fn scenario(name: &str) -> Result<ScenarioName, Error> {
    name.parse()
}

fn graph_from_json(s: &str) -> Result<WeightedGraph, Error> {
    let j: GraphJson = serde_json::from_str(s).map_err(|e| Error::Input(format!("bad graph: {e}")))?;
    WeightedGraph::from_json(&j)
}

fn bounds(g: &WeightedGraph) -> Result<(f64, f64, f64), Error> {
    let (alpha, _) = independence_number(g)?;
    let (theta, _) = theta_selftest::lovasz_theta(g)?;
    Ok((alpha, theta, fractional_packing(g)?))
}

fn candidate(name: ScenarioName, json: Option<&str>) -> Result<Realization, Error> {
    match json {
        Some(s) => Realization::from_json(&parse_json(s)?),
        None => reference_realization(name),
    }
}

fn run_self_test(name: &str, cand: Option<&str>) -> Result<String, Error> {
    let name = scenario(name)?;
    let report = self_test(&witness(name)?, &reference_realization(name)?, &candidate(name, cand)?)?;
    Ok(report.to_json().to_string())
}

fn run_verify(name: &str, cand: Option<&str>, report: &str, tol: f64) -> Result<bool, Error> {
    let name = scenario(name)?;
    let report = SelfTestReport::from_json(&parse_json(report)?)?;
    Ok(verify_selftest_claim(
        &reference_realization(name)?,
        &candidate(name, cand)?,
        &witness(name)?,
        &report,
        tol,
    ))
}

/// Lovász theta of a weighted graph given as `{"n", "edges", "weights"}` JSON.
#[pyfunction]
fn lovasz_theta(graph_json: &str) -> PyResult<f64> {
    let g = graph_from_json(graph_json).map_err(to_py)?;
    theta_selftest::lovasz_theta(&g).map(|(t, _)| t).map_err(to_py)
}

/// `(alpha, theta, alpha_star)` for a graph JSON string.
#[pyfunction]
fn graph_bounds(graph_json: &str) -> PyResult<(f64, f64, f64)> {
    bounds(&graph_from_json(graph_json).map_err(to_py)?).map_err(to_py)
}

/// `(alpha, theta, alpha_star)` for the exclusivity graph of a named scenario.
#[pyfunction]
fn scenario_bounds(name: &str) -> PyResult<(f64, f64, f64)> {
    let w = witness(scenario(name).map_err(to_py)?).map_err(to_py)?;
    bounds(&exclusivity_graph(&w)).map_err(to_py)
}

#[pyfunction]
fn scenario_graph(name: &str) -> PyResult<String> {
    let w = witness(scenario(name).map_err(to_py)?).map_err(to_py)?;
    serde_json::to_string(&exclusivity_graph(&w).to_json()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn reference(name: &str) -> PyResult<String> {
    let r = reference_realization(scenario(name).map_err(to_py)?).map_err(to_py)?;
    Ok(r.to_json().to_string())
}

/// Witness value of a realization; the reference one when `candidate` is None.
#[pyfunction]
#[pyo3(signature = (name, candidate=None))]
fn witness_value(name: &str, candidate: Option<&str>) -> PyResult<f64> {
    let n = scenario(name).map_err(to_py)?;
    let r = self::candidate(n, candidate).map_err(to_py)?;
    evaluate_witness(&witness(n).map_err(to_py)?, &r)
        .map(|e| e.value)
        .map_err(to_py)
}

/// Runs extraction and returns the report as JSON.
#[pyfunction]
#[pyo3(name = "self_test", signature = (name, candidate=None))]
fn py_self_test(name: &str, candidate: Option<&str>) -> PyResult<String> {
    run_self_test(name, candidate).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (name, report, candidate=None, tol=1e-7))]
fn verify(name: &str, report: &str, candidate: Option<&str>, tol: f64) -> PyResult<bool> {
    run_verify(name, candidate, report, tol).map_err(to_py)
}

#[pymodule]
fn theta_selftest_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lovasz_theta, m)?)?;
    m.add_function(wrap_pyfunction!(graph_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_graph, m)?)?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(witness_value, m)?)?;
    m.add_function(wrap_pyfunction!(py_self_test, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
