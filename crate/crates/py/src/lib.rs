//! Python module `norma._norma`. Formats are passed as strings; query
//! results come back as the same JSON the HTTP API returns.

use std::collections::BTreeMap;

use norma_core::checker::DEFAULT_STATE_LIMIT;
use norma_core::query::QueryInstance;
use norma_service::ops::{self, ApiError};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(_norma, NormaError, PyException, "Pipeline failure; args are (code, message, location).");

fn raise(e: ApiError) -> PyErr {
    NormaError::new_err((e.code, e.message, e.location))
}

fn instance(template: u32, bindings: Option<BTreeMap<String, String>>) -> QueryInstance {
    bindings.unwrap_or_default().into_iter().fold(QueryInstance::new(template), |q, (k, v)| q.bind(&k, v))
}

/// English text to a TSV clause table.
#[pyfunction]
fn extract(text: &str) -> PyResult<String> {
    ops::nl_to_tsv(text).map_err(raise)
}

#[pyfunction]
fn tsv_to_coml(tsv: &str) -> PyResult<String> {
    ops::tsv_to_coml(tsv).map_err(raise)
}

#[pyfunction]
fn coml_to_codsh(coml: &str) -> PyResult<String> {
    ops::coml_to_codsh(coml).map_err(raise)
}

/// Returns `(text, missing_words)`.
#[pyfunction]
fn coml_to_cnl(coml: &str) -> PyResult<(String, Vec<String>)> {
    ops::coml_to_cnl(coml).map_err(raise)
}

#[pyfunction]
fn coml_to_uppaal(coml: &str) -> PyResult<String> {
    ops::coml_to_uppaal(coml).map_err(raise)
}

#[pyfunction]
fn templates() -> String {
    ops::templates()
}

#[pyfunction]
#[pyo3(signature = (coml, template, bindings=None))]
fn syntactic(coml: &str, template: u32, bindings: Option<BTreeMap<String, String>>) -> PyResult<String> {
    ops::syntactic(coml, &instance(template, bindings)).map_err(raise)
}

#[pyfunction]
#[pyo3(signature = (coml, template, bindings=None, horizon=None, state_limit=DEFAULT_STATE_LIMIT))]
fn semantic(
    py: Python<'_>,
    coml: &str,
    template: u32,
    bindings: Option<BTreeMap<String, String>>,
    horizon: Option<u32>,
    state_limit: usize,
) -> PyResult<String> {
    let q = instance(template, bindings);
    py.detach(|| ops::semantic(coml, &q, horizon, state_limit)).map_err(raise)
}

#[pymodule]
fn _norma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NormaError", m.py().get_type::<NormaError>())?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(tsv_to_coml, m)?)?;
    m.add_function(wrap_pyfunction!(coml_to_codsh, m)?)?;
    m.add_function(wrap_pyfunction!(coml_to_cnl, m)?)?;
    m.add_function(wrap_pyfunction!(coml_to_uppaal, m)?)?;
    m.add_function(wrap_pyfunction!(templates, m)?)?;
    m.add_function(wrap_pyfunction!(syntactic, m)?)?;
    m.add_function(wrap_pyfunction!(semantic, m)?)?;
    Ok(())
}
