//! Python module `pynmdf`: string-in, string-out access to the nmdf pipeline plus a few
//! geometry and factorization primitives on plain nested lists.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nmdf::eval;
use nmdf::io::{self, BlockDataset, GlyphOptions};
use nmdf::linalg::SymMatrix;
use nmdf::manifold::{self, Point};
use nmdf::nmdf::{Method, Params};
use nmdf::synth;

fn py_err(e: nmdf::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn dataset(json: &str) -> PyResult<BlockDataset> {
    io::read_dataset_json(json.as_bytes()).map_err(py_err)
}

fn basepoint(ds: &BlockDataset, kind: &str) -> PyResult<Point> {
    match kind {
        "near-zero" => Point::scaled_identity(&ds.descriptor, 1e-5).map_err(py_err),
        "barycenter" => Ok(manifold::barycenter(&ds.points, 1e-10, 200).map_err(py_err)?.point),
        other => Err(PyValueError::new_err(format!("unknown base point {other:?}"))),
    }
}

fn spd(rows: Vec<Vec<f64>>) -> PyResult<Point> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let s = SymMatrix::from_full(&ndarray::Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])).map_err(py_err)?;
    Point::spd(s).map_err(py_err)
}

fn to_rows(a: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Synthetic diffusion-tensor field as TFLD text.
#[pyfunction]
#[pyo3(signature = (dims, seed = 0))]
fn synth_field(dims: (usize, usize, usize), seed: u64) -> PyResult<String> {
    let field = synth::dti_field(&mut synth::rng(seed), [dims.0, dims.1, dims.2]).map_err(py_err)?;
    let mut out = Vec::new();
    io::write_tfld(&field, &mut out).map_err(py_err)?;
    Ok(String::from_utf8(out).expect("ascii"))
}

/// Parse TFLD text, cut it into blocks and return the dataset JSON.
#[pyfunction]
#[pyo3(signature = (tfld, block = (4, 4, 4)))]
fn ingest(tfld: &str, block: (usize, usize, usize)) -> PyResult<String> {
    let field = io::parse_tfld(tfld.as_bytes()).map_err(py_err)?;
    let ds = io::extract_blocks(&field, [block.0, block.1, block.2]).map_err(py_err)?;
    let mut out = Vec::new();
    io::write_dataset_json(&ds, &mut out).map_err(py_err)?;
    Ok(String::from_utf8(out).expect("utf-8"))
}

/// Fit a factorization; returns the factorization JSON.
#[pyfunction]
#[pyo3(signature = (dataset_json, rank, method = "cc-nmdf", basepoint_kind = "near-zero", delta = 0.1,
                    max_iter = 50, max_sub_iter = 5, restarts = 10, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn factorize(
    py: Python<'_>,
    dataset_json: &str,
    rank: usize,
    method: &str,
    basepoint_kind: &str,
    delta: f64,
    max_iter: usize,
    max_sub_iter: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<String> {
    let ds = dataset(dataset_json)?;
    let method: Method = method.parse().map_err(py_err)?;
    let q = basepoint(&ds, basepoint_kind)?;
    let params = Params { delta, max_iter, max_sub_iter, restarts, seed };
    let fac = py.detach(|| eval::fit(&ds.points, &q, rank, method, &params)).map_err(py_err)?;
    let mut out = Vec::new();
    io::write_factorization_json(&fac, &mut out).map_err(py_err)?;
    Ok(String::from_utf8(out).expect("utf-8"))
}

/// Exact, tangent and curvature-corrected errors of a stored factorization.
#[pyfunction]
fn errors(dataset_json: &str, factorization_json: &str) -> PyResult<HashMap<String, f64>> {
    let ds = dataset(dataset_json)?;
    let fac = io::read_factorization_json(factorization_json.as_bytes()).map_err(py_err)?;
    let r = eval::error_report(&ds.points, &fac).map_err(py_err)?;
    Ok(HashMap::from([
        ("rank".to_string(), r.rank as f64),
        ("exact".to_string(), r.exact),
        ("tangent".to_string(), r.tangent),
        ("cc".to_string(), r.cc),
    ]))
}

/// SVG glyphs of the manifold-valued factors.
#[pyfunction]
#[pyo3(signature = (factorization_json, layout = None, scale = None))]
fn render(factorization_json: &str, layout: Option<(usize, usize)>, scale: Option<f64>) -> PyResult<String> {
    let fac = io::read_factorization_json(factorization_json.as_bytes()).map_err(py_err)?;
    let opts = GlyphOptions { layout, scale, comment: "pynmdf.render".into() };
    io::render_glyphs(&fac.y, &opts).map_err(py_err)
}

/// `(ok, min_inner)` of the base-point check.
#[pyfunction]
#[pyo3(signature = (dataset_json, basepoint_kind = "near-zero"))]
fn check_basepoint(dataset_json: &str, basepoint_kind: &str) -> PyResult<(bool, f64)> {
    let ds = dataset(dataset_json)?;
    let q = basepoint(&ds, basepoint_kind)?;
    let c = nmdf::nmdf::verify_basepoint(&ds.points, &q).map_err(py_err)?;
    Ok((c.ok, c.min_inner))
}

/// Affine-invariant distance between two SPD matrices.
#[pyfunction]
fn spd_dist(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    manifold::dist(&spd(a)?, &spd(b)?).map_err(py_err)
}

/// Semi-NMF `M ~ H F` with `H >= 0`; returns `(H, F, objective_trace)`.
#[pyfunction]
#[pyo3(signature = (m, k, iters = 100, seed = 0))]
#[allow(clippy::type_complexity)]
fn semi_nmf(m: Vec<Vec<f64>>, k: usize, iters: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must have equal length"));
    }
    let a = ndarray::Array2::from_shape_fn((rows, cols), |(i, j)| m[i][j]);
    let r = nmdf::euclid::semi_nmf(a.view(), k, iters, None, seed).map_err(py_err)?;
    Ok((to_rows(&r.h), to_rows(&r.f), r.objective_trace))
}

#[pymodule]
fn pynmdf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(synth_field, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(errors, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(check_basepoint, m)?)?;
    m.add_function(wrap_pyfunction!(spd_dist, m)?)?;
    m.add_function(wrap_pyfunction!(semi_nmf, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
