//! Python bindings for the conformal-geo toolkit.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use conformal_geo::curvature;
use conformal_geo::euclid;
use conformal_geo::geodesic::{self, Formulation, GeodesicState, StepControl};
use conformal_geo::metric::{ConformalFactor, DerivMode, MetricField as CoreField, DEFAULT_FD_STEP};
use conformal_geo::stereographic;
use conformal_geo::tensor::Vector;

fn err(e: conformal_geo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .unbind()
                    .into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

fn parse_formulation(name: &str) -> PyResult<Formulation> {
    match name {
        "a_form" | "a" => Ok(Formulation::AForm),
        "b_form" | "b" => Ok(Formulation::BForm),
        "c_form" | "c" => Ok(Formulation::CForm),
        other => Err(PyValueError::new_err(format!(
            "unknown formulation {other:?}; expected a_form, b_form, or c_form"
        ))),
    }
}

/// A Riemannian metric field on a chart region.
#[pyclass(name = "MetricField", frozen)]
struct PyMetricField {
    inner: CoreField,
}

#[pymethods]
impl PyMetricField {
    /// Flat Euclidean metric on R^n.
    #[staticmethod]
    fn euclidean(dimension: usize) -> PyResult<Self> {
        Ok(PyMetricField {
            inner: CoreField::euclidean(dimension).map_err(err)?,
        })
    }

    /// Round-sphere metric in the stereographic chart.
    #[staticmethod]
    fn round_sphere(dimension: usize) -> PyResult<Self> {
        Ok(PyMetricField {
            inner: CoreField::round_sphere(dimension).map_err(err)?,
        })
    }

    /// Euclidean metric rescaled by a constant conformal factor.
    #[staticmethod]
    fn rescaled_constant(dimension: usize, omega: f64) -> PyResult<Self> {
        let base = CoreField::euclidean(dimension).map_err(err)?;
        let factor = ConformalFactor::constant(omega).map_err(err)?;
        Ok(PyMetricField {
            inner: base.conformal_rescale(factor),
        })
    }

    /// Switch to finite-difference derivatives (the default step when
    /// `step` is omitted).
    #[pyo3(signature = (step=None))]
    fn with_finite_differences(&self, step: Option<f64>) -> PyResult<Self> {
        Ok(PyMetricField {
            inner: self
                .inner
                .clone()
                .with_deriv_mode(DerivMode::FiniteDifference {
                    step: step.unwrap_or(DEFAULT_FD_STEP),
                })
                .map_err(err)?,
        })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_owned()
    }

    /// Metric matrix at a chart point, as nested lists.
    fn metric_at(&self, py: Python<'_>, point: Vec<f64>) -> PyResult<Py<PyAny>> {
        let g = self.inner.metric_at(&point).map_err(err)?;
        to_py(py, &g)
    }

    /// Christoffel symbols, Ricci, scalar curvature, and Schouten tensor
    /// at a chart point, as a dict.
    fn curvature_at(&self, py: Python<'_>, point: Vec<f64>) -> PyResult<Py<PyAny>> {
        let curv = curvature::curvature_at(&self.inner, &point).map_err(err)?;
        to_py(py, &curv)
    }

    fn __repr__(&self) -> String {
        format!(
            "MetricField({}, dimension={})",
            self.inner.name(),
            self.inner.dim()
        )
    }
}

/// Integrates a conformal geodesic and returns the trajectory as a dict
/// with `termination`, `metric_name`, and `samples`.
#[pyfunction]
#[pyo3(signature = (field, formulation, position, velocity, acceleration,
                    param_end, param_start=0.0, abs_tol=None, rel_tol=None,
                    max_step=None))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    field: &PyMetricField,
    formulation: &str,
    position: Vec<f64>,
    velocity: Vec<f64>,
    acceleration: Vec<f64>,
    param_end: f64,
    param_start: f64,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_step: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let form = parse_formulation(formulation)?;
    let vel = Vector::new(velocity).map_err(err)?;
    let acc = Vector::new(acceleration).map_err(err)?;
    let init = match form {
        Formulation::AForm => GeodesicState::a_form(&field.inner, position, vel, acc, param_start),
        Formulation::BForm => GeodesicState::b_form(&field.inner, position, vel, acc, param_start),
        Formulation::CForm => GeodesicState::c_form(&field.inner, position, vel, acc, param_start),
    }
    .map_err(err)?;
    let defaults = StepControl::default();
    let ctrl = StepControl {
        abs_tol: abs_tol.unwrap_or(defaults.abs_tol),
        rel_tol: rel_tol.unwrap_or(defaults.rel_tol),
        max_step: max_step.unwrap_or(defaults.max_step),
        ..defaults
    };
    let traj = geodesic::integrate(&field.inner, &init, param_end, &ctrl).map_err(err)?;
    to_py(py, &traj)
}

/// Point of the closed-form Euclidean conformal circle with initial
/// acceleration `(alpha, beta)` at parameter `tau`.
#[pyfunction]
#[pyo3(signature = (alpha, beta, tau, dimension=2))]
fn eval_circle(alpha: f64, beta: f64, tau: f64, dimension: usize) -> PyResult<Vec<f64>> {
    let p = euclid::CircleParams::new(alpha, beta, dimension).map_err(err)?;
    euclid::eval_circle(&p, tau).map_err(err)
}

/// Centre and radius of the circle traced for `beta != 0`.
#[pyfunction]
#[pyo3(signature = (alpha, beta, dimension=2))]
fn circle_center_radius(alpha: f64, beta: f64, dimension: usize) -> PyResult<(Vec<f64>, f64)> {
    let p = euclid::CircleParams::new(alpha, beta, dimension).map_err(err)?;
    euclid::circle_center_radius(&p).map_err(err)
}

/// Projective parameterization of the degenerate line case.
#[pyfunction]
fn line_param(alpha: f64, tau: f64) -> PyResult<f64> {
    euclid::line_param(alpha, tau).map_err(err)
}

/// Limit of the circle as `tau -> +/- infinity`.
#[pyfunction]
#[pyo3(signature = (alpha, beta, dimension=2))]
fn limit_point(alpha: f64, beta: f64, dimension: usize) -> PyResult<Vec<f64>> {
    let p = euclid::CircleParams::new(alpha, beta, dimension).map_err(err)?;
    euclid::limit_point(&p).map_err(err)
}

/// The `tau = 1` endpoint of the curve with `beta = sigma (2 - alpha)`.
#[pyfunction]
fn endpoint_sigma(alpha: f64, sigma: f64) -> PyResult<Vec<f64>> {
    euclid::endpoint_sigma(alpha, sigma).map_err(err)
}

/// Inverse stereographic projection of a chart point onto the unit
/// sphere in R^{n+1}.
#[pyfunction]
fn to_sphere(x: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(stereographic::to_sphere(&x).map_err(err)?.coords().to_vec())
}

/// Stereographic projection of a unit-sphere point back to the chart.
#[pyfunction]
fn from_sphere(p: Vec<f64>) -> PyResult<Vec<f64>> {
    let sp = stereographic::SpherePoint::new(p).map_err(err)?;
    stereographic::from_sphere(&sp).map_err(err)
}

/// Conformal factor `2 / (1 + |x|^2)` of the stereographic chart.
#[pyfunction]
fn conformal_factor(x: Vec<f64>) -> f64 {
    stereographic::conformal_factor(&x)
}

/// Chordal distance from the image of `x` to the projection pole.
#[pyfunction]
fn pole_distance(x: Vec<f64>) -> f64 {
    stereographic::pole_distance(&x)
}

/// Converts the projective-parameter acceleration `A` to the `B` field
/// under the Euclidean metric.
#[pyfunction]
fn a_to_b(velocity: Vec<f64>, acceleration: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = velocity.len();
    let g = conformal_geo::SymMatrix::identity(n);
    let v = Vector::new(velocity).map_err(err)?;
    let a = Vector::new(acceleration).map_err(err)?;
    Ok(geodesic::a_to_b(&v, &a, &g).map_err(err)?.into_components())
}

/// Inverse of `a_to_b`.
#[pyfunction]
fn b_to_a(velocity: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = velocity.len();
    let g = conformal_geo::SymMatrix::identity(n);
    let v = Vector::new(velocity).map_err(err)?;
    let bv = Vector::new(b).map_err(err)?;
    Ok(geodesic::b_to_a(&v, &bv, &g).map_err(err)?.into_components())
}

#[pymodule]
fn geo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetricField>()?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(eval_circle, m)?)?;
    m.add_function(wrap_pyfunction!(circle_center_radius, m)?)?;
    m.add_function(wrap_pyfunction!(line_param, m)?)?;
    m.add_function(wrap_pyfunction!(limit_point, m)?)?;
    m.add_function(wrap_pyfunction!(endpoint_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(to_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(from_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(conformal_factor, m)?)?;
    m.add_function(wrap_pyfunction!(pole_distance, m)?)?;
    m.add_function(wrap_pyfunction!(a_to_b, m)?)?;
    m.add_function(wrap_pyfunction!(b_to_a, m)?)?;
    Ok(())
}
