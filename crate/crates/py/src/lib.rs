//! Python bindings: the corpus, the verifier and the expression engine.
//!
//! The `*_impl` functions carry the logic so they can be tested without an
//! interpreter; the `#[pyfunction]` wrappers only convert errors.

use std::collections::HashMap;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use sasaki_lab::corpus::{build_example, build_example_with, KEYS};
use sasaki_lab::exprlang::{eval, eval_f64, parse};
use sasaki_lab::manifold::{SamplePlan, DEFAULT_COUNT, DEFAULT_SEED};
use sasaki_lab::numkernel::DScalar;
use sasaki_lab::report::to_json;
use sasaki_lab::GeomError;

fn value_error(e: GeomError) -> PyErr {
    match e {
        GeomError::UnknownKey(k) => PyKeyError::new_err(k),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn pairs(params: Option<HashMap<String, String>>) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = params.unwrap_or_default().into_iter().collect();
    v.sort();
    v
}

pub fn examples_impl() -> Result<Vec<(String, String, usize)>, GeomError> {
    KEYS.iter()
        .map(|k| build_example(k).map(|e| (k.to_string(), e.summary.clone(), e.checks.len())))
        .collect()
}

pub fn verify_impl(
    key: &str,
    checks: Option<Vec<String>>,
    samples: usize,
    seed: u64,
    tol: Option<f64>,
    params: Vec<(String, String)>,
) -> Result<String, GeomError> {
    let plan = SamplePlan::new(seed, samples);
    let keys: Vec<&str> = if key == "all" { KEYS.to_vec() } else { vec![key] };
    if key == "all" && !params.is_empty() {
        return Err(GeomError::Invalid("parameters need a single key".into()));
    }
    let mut reports = Vec::new();
    for k in keys {
        let ex = build_example_with(k, &params)?;
        let only: Option<Vec<String>> = checks
            .as_ref()
            .map(|c| c.iter().filter(|n| key != "all" || ex.find_check(n).is_some()).cloned().collect());
        if only.as_ref().is_some_and(|o| o.is_empty()) {
            continue;
        }
        reports.extend(ex.run(&plan, tol, only.as_deref())?);
    }
    Ok(to_json(&reports))
}

/// Value and partial derivative of `expr` with respect to `wrt`.
pub fn derivative_impl(expr: &str, vars: &HashMap<String, f64>, wrt: &str) -> Result<(f64, f64), GeomError> {
    let e = parse(expr)?;
    if !vars.contains_key(wrt) {
        return Err(GeomError::Invalid(format!("`{wrt}` has no value")));
    }
    let env: HashMap<String, DScalar> = vars
        .iter()
        .map(|(k, &v)| Ok((k.clone(), if k == wrt { DScalar::variable(v, 0)? } else { DScalar::constant(v) })))
        .collect::<Result<_, GeomError>>()?;
    let d = eval(&e, &env)?;
    Ok((d.value(), d.coeff(1)))
}

/// `(key, summary, number of checks)` for every corpus entry.
#[pyfunction]
fn examples() -> PyResult<Vec<(String, String, usize)>> {
    examples_impl().map_err(value_error)
}

/// Text form of an entry.
#[pyfunction]
#[pyo3(signature = (key, params=None))]
fn show(key: &str, params: Option<HashMap<String, String>>) -> PyResult<String> {
    build_example_with(key, &pairs(params)).map(|e| e.to_text()).map_err(value_error)
}

/// Runs the declared checks and returns the reports as a JSON array.
#[pyfunction]
#[pyo3(signature = (key, checks=None, samples=DEFAULT_COUNT, seed=DEFAULT_SEED, tol=None, params=None))]
fn verify(
    key: &str,
    checks: Option<Vec<String>>,
    samples: usize,
    seed: u64,
    tol: Option<f64>,
    params: Option<HashMap<String, String>>,
) -> PyResult<String> {
    if samples == 0 {
        return Err(PyValueError::new_err("samples must be positive"));
    }
    verify_impl(key, checks, samples, seed, tol, pairs(params)).map_err(value_error)
}

/// Canonical printed form of an expression.
#[pyfunction]
fn normalize(expr: &str) -> PyResult<String> {
    parse(expr).map(|e| e.to_string()).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (expr, vars=None))]
fn evaluate(expr: &str, vars: Option<HashMap<String, f64>>) -> PyResult<f64> {
    let e = parse(expr).map_err(|e| PyValueError::new_err(e.to_string()))?;
    eval_f64(&e, &vars.unwrap_or_default()).map_err(value_error)
}

#[pyfunction]
fn derivative(expr: &str, vars: HashMap<String, f64>, wrt: &str) -> PyResult<(f64, f64)> {
    derivative_impl(expr, &vars, wrt).map_err(value_error)
}

#[pymodule]
fn sasaki_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(show, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(derivative, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_listed() {
        let ex = examples_impl().unwrap();
        assert_eq!(ex.len(), KEYS.len());
        assert!(ex.iter().all(|(_, _, n)| *n > 0));
    }

    #[test]
    fn verify_returns_a_json_array() {
        let s = verify_impl("darboux-1", Some(vec!["reeb".into()]), 4, 1, None, vec![]).unwrap();
        assert!(s.starts_with('[') && s.contains("\"check\": \"reeb\""), "{s}");
        assert!(verify_impl("torus", None, 4, 1, None, vec![]).is_err());
    }

    #[test]
    fn derivative_of_a_product() {
        let vars = HashMap::from([("x".to_string(), 0.5), ("y".to_string(), 2.0)]);
        let (v, d) = derivative_impl("x^2*y + sin(x)", &vars, "x").unwrap();
        assert!((v - (0.5 + 0.5f64.sin())).abs() < 1e-15);
        assert!((d - (2.0 + 0.5f64.cos())).abs() < 1e-15);
    }
}
