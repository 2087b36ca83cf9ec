//! Python bindings. Points are passed as lists of floats; curves come back
//! as (times, points) pairs.

use lgeo::divergence::{c_divergence, l_divergence};
use lgeo::finance::{fernholz_decompose, rebalance_compare};
use lgeo::generator::{check_regularity, dual_coord};
use lgeo::geodesic::{dual_flow, dual_geodesic, primal_flow, primal_geodesic, pythagorean_sign, uniform_grid};
use lgeo::geometry::{sectional_curvature, LocalFrame};
use lgeo::region::region_sample;
use lgeo::transport::{gaussian_example_check, GAUSSIAN_SAMPLES, GAUSSIAN_SEED};
use lgeo::{Builtin, Connection, Curve, Error, Generator, MarketPath, PrimalCoord, SimplexPoint};
use nalgebra::DVector;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn point(x: Vec<f64>) -> PyResult<SimplexPoint> {
    SimplexPoint::new(x).map_err(to_py)
}

fn chart(name: &str) -> PyResult<Connection> {
    match name {
        "primal" => Ok(Connection::Primal),
        "dual" => Ok(Connection::Dual),
        other => Err(PyValueError::new_err(format!("unknown chart {other:?}, use 'primal' or 'dual'"))),
    }
}

type CurveData = (Vec<f64>, Vec<Vec<f64>>);

fn curve_data(c: Curve, simplex: bool) -> PyResult<CurveData> {
    let c = if simplex { c.to_simplex().map_err(to_py)? } else { c };
    Ok((c.times().to_vec(), c.points().iter().map(|p| p.as_slice().to_vec()).collect()))
}

/// A built-in generating function.
#[pyclass(name = "Generator", module = "lgeo", frozen, from_py_object)]
#[derive(Clone)]
struct PyGenerator(Builtin);

#[pymethods]
impl PyGenerator {
    #[staticmethod]
    fn market() -> Self {
        PyGenerator(Builtin::market())
    }

    #[staticmethod]
    fn constant_weighted(weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyGenerator(Builtin::constant_weighted(&point(weights)?)))
    }

    #[staticmethod]
    fn equal_weighted(n: usize) -> PyResult<Self> {
        Builtin::equal_weighted(n).map(PyGenerator).map_err(to_py)
    }

    #[staticmethod]
    fn diversity(lam: f64) -> PyResult<Self> {
        Builtin::diversity(lam).map(PyGenerator).map_err(to_py)
    }

    #[staticmethod]
    fn generalized_diversity(weights: Vec<f64>, lam: f64) -> PyResult<Self> {
        Builtin::generalized_diversity(weights, lam).map(PyGenerator).map_err(to_py)
    }

    /// Positive combination from a list of (coefficient, generator) pairs.
    #[staticmethod]
    fn combination(parts: Vec<(f64, PyGenerator)>) -> PyResult<Self> {
        Builtin::combination(parts.into_iter().map(|(c, g)| (c, g.0)).collect())
            .map(PyGenerator)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Builtin::from_json(text).map(PyGenerator).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn log_gen(&self, p: Vec<f64>) -> PyResult<f64> {
        Ok(self.0.log_gen(&point(p)?))
    }

    fn portfolio(&self, p: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.portfolio(&point(p)?).as_slice().to_vec())
    }

    fn dual_coord(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        let th = PrimalCoord::new(theta).map_err(to_py)?;
        Ok(dual_coord(&self.0, &th).map_err(to_py)?.as_slice().to_vec())
    }

    /// Number of points (out of those given) where regularity fails.
    fn regularity_failures(&self, points: Vec<Vec<f64>>) -> PyResult<usize> {
        let pts = points.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
        Ok(check_regularity(&self.0, &pts).map_err(to_py)?.failures.len())
    }

    fn __repr__(&self) -> String {
        format!("Generator({})", self.0.label())
    }
}

/// T(q|p).
#[pyfunction]
fn divergence(gen: &PyGenerator, q: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    Ok(l_divergence(&gen.0, &point(q)?, &point(p)?).map_err(to_py)?.value)
}

/// c-divergence D(p|p_ref).
#[pyfunction]
fn c_div(gen: &PyGenerator, p: Vec<f64>, p_ref: Vec<f64>) -> PyResult<f64> {
    c_divergence(&gen.0, &point(p)?, &point(p_ref)?).map_err(to_py)
}

/// Metric matrix at p in the primal or dual chart.
#[pyfunction]
#[pyo3(signature = (gen, p, which = "primal"))]
fn metric(gen: &PyGenerator, p: Vec<f64>, which: &str) -> PyResult<Vec<Vec<f64>>> {
    let frame = LocalFrame::at(&gen.0, &point(p)?).map_err(to_py)?;
    let g = frame.metric(chart(which)?).entries;
    Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
}

#[pyfunction]
#[pyo3(signature = (gen, p, u, v, which = "primal"))]
fn sectional(gen: &PyGenerator, p: Vec<f64>, u: Vec<f64>, v: Vec<f64>, which: &str) -> PyResult<f64> {
    sectional_curvature(&gen.0, &point(p)?, &DVector::from_vec(u), &DVector::from_vec(v), chart(which)?)
        .map_err(to_py)
}

/// Closed-form geodesic from q to r as (times, points). With `simplex` the
/// points are Euclidean (primal) or dual Euclidean (dual) weights.
#[pyfunction]
#[pyo3(signature = (gen, q, r, which = "primal", grid = 129, simplex = false))]
fn geodesic(gen: &PyGenerator, q: Vec<f64>, r: Vec<f64>, which: &str, grid: usize, simplex: bool) -> PyResult<CurveData> {
    let (q, r, g) = (point(q)?, point(r)?, uniform_grid(grid));
    let c = match chart(which)? {
        Connection::Primal => primal_geodesic(&gen.0, &q, &r, &g),
        Connection::Dual => dual_geodesic(&gen.0, &q, &r, &g),
    }
    .map_err(to_py)?;
    curve_data(c, simplex)
}

/// Gradient flow from q towards r.
#[pyfunction]
#[pyo3(signature = (gen, q, r, which = "primal", horizon = 20.0, steps = 2000, simplex = false))]
fn flow(
    gen: &PyGenerator,
    q: Vec<f64>,
    r: Vec<f64>,
    which: &str,
    horizon: f64,
    steps: usize,
    simplex: bool,
) -> PyResult<CurveData> {
    let (q, r) = (point(q)?, point(r)?);
    let c = match chart(which)? {
        Connection::Primal => primal_flow(&gen.0, &q, &r, horizon, steps),
        Connection::Dual => dual_flow(&gen.0, &q, &r, horizon, steps),
    }
    .map_err(to_py)?;
    curve_data(c, simplex)
}

/// gap, inner, sign_quantity and angle_deg at the vertex q.
#[pyfunction]
fn pythagorean<'py>(py: Python<'py>, gen: &PyGenerator, p: Vec<f64>, q: Vec<f64>, r: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let res = pythagorean_sign(&gen.0, &point(p)?, &point(q)?, &point(r)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("gap", res.gap)?;
    d.set_item("inner", res.inner)?;
    d.set_item("sign_quantity", res.sign_quantity)?;
    d.set_item("angle_deg", res.angle_deg)?;
    Ok(d)
}

/// Per-step log value, drift, cumulative divergence and identity residual.
#[pyfunction]
fn backtest<'py>(py: Python<'py>, gen: &PyGenerator, weights: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let pts = weights.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
    let path = MarketPath::from_weights(pts).map_err(to_py)?;
    let report = fernholz_decompose(&gen.0, &path).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("log_value", report.rows.iter().map(|r| r.log_value).collect::<Vec<_>>())?;
    d.set_item("drift", report.rows.iter().map(|r| r.drift).collect::<Vec<_>>())?;
    d.set_item("cumulative_divergence", report.rows.iter().map(|r| r.cumulative_divergence).collect::<Vec<_>>())?;
    d.set_item("identity_residual", report.rows.iter().map(|r| r.identity_residual).collect::<Vec<_>>())?;
    Ok(d)
}

/// log V_a − log V_b for two rebalancing schedules, plus the Pythagorean gap
/// when it applies (None otherwise).
#[pyfunction]
fn compare_schedules(
    gen: &PyGenerator,
    weights: Vec<Vec<f64>>,
    schedule_a: Vec<usize>,
    schedule_b: Vec<usize>,
) -> PyResult<(f64, Option<f64>)> {
    let pts = weights.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
    let path = MarketPath::from_weights(pts).map_err(to_py)?;
    let cmp = rebalance_compare(&gen.0, &path, &schedule_a, &schedule_b).map_err(to_py)?;
    Ok((cmp.difference, cmp.pythagorean_gap))
}

/// Lattice of the three-asset region as (q, gap, in_region) triples.
#[pyfunction]
#[pyo3(signature = (gen, p, r, resolution = 100))]
fn region(gen: &PyGenerator, p: Vec<f64>, r: Vec<f64>, resolution: usize) -> PyResult<Vec<(Vec<f64>, f64, bool)>> {
    let sample = region_sample(&gen.0, &point(p)?, &point(r)?, resolution).map_err(to_py)?;
    Ok(sample.points.iter().map(|pt| (pt.q.to_vec(), pt.gap, pt.in_region)).collect())
}

/// Gaussian product example; returns one dict per marginal plus the affinity residual.
#[pyfunction]
#[pyo3(signature = (a, b, sigma, lam, samples = GAUSSIAN_SAMPLES, seed = GAUSSIAN_SEED))]
fn gaussian_check<'py>(
    py: Python<'py>,
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
    lam: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = gaussian_example_check(&a, &b, &sigma, lam, samples, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("affinity_residual", report.affinity_residual)?;
    d.set_item("graph_monotone", report.graph_monotone)?;
    let marginals = report
        .marginals
        .iter()
        .map(|m| {
            let e = PyDict::new(py);
            e.set_item("sample_mean", m.sample_mean)?;
            e.set_item("sample_variance", m.sample_variance)?;
            e.set_item("target_variance", m.target_variance)?;
            e.set_item("map_variance", m.map_variance)?;
            Ok(e)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("marginals", marginals)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "lgeo")]
fn lgeo_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(c_div, m)?)?;
    m.add_function(wrap_pyfunction!(metric, m)?)?;
    m.add_function(wrap_pyfunction!(sectional, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic, m)?)?;
    m.add_function(wrap_pyfunction!(flow, m)?)?;
    m.add_function(wrap_pyfunction!(pythagorean, m)?)?;
    m.add_function(wrap_pyfunction!(backtest, m)?)?;
    m.add_function(wrap_pyfunction!(compare_schedules, m)?)?;
    m.add_function(wrap_pyfunction!(region, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_check, m)?)?;
    Ok(())
}
