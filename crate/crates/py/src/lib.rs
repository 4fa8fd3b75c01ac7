//! Python bindings. Structured results (reports, sweep rows) come back as
//! plain dicts via their JSON form.

use layerstab::dynamics::periodic_shear_rate;
use layerstab::energy::kawashima_k;
use layerstab::evans::{
    check_condition_d, winding_number, Contour, EvansFunction as CoreEvans, EvansOptions, LayerProblem,
    ScalarProblem, WindingOptions,
};
use layerstab::linalg::RVector;
use layerstab::model::{
    build_isentropic_2d, check_constant_multiplicity, check_genuine_coupling, check_hyperbolicity,
    check_noncharacteristic, check_structure, BuiltModel, FlowCase, HypothesisReport, IsentropicParams as CoreParams,
    ModelSpec, SystemDefinition,
};
use layerstab::profile::{
    drag, explicit_transverse, layer_grid, solve_profile_with, verify_decay, Profile as CoreProfile, ShootingOptions,
    WallConstraints,
};
use layerstab::sweep::{run_sweep, SweepGrid, SweepOptions};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use std::sync::Arc;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_vec(v: &RVector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Compressible isentropic Navier-Stokes in 2D with wall velocity `V`.
#[pyclass(module = "layerstab_py", from_py_object)]
#[derive(Clone)]
pub struct IsentropicParams {
    inner: CoreParams,
}

#[pymethods]
impl IsentropicParams {
    #[new]
    #[pyo3(signature = (rho0, v_wall, u_inf, mu, eta = 0.0, a = 1.0, gamma = 1.4))]
    fn new(rho0: f64, v_wall: f64, u_inf: f64, mu: f64, eta: f64, a: f64, gamma: f64) -> PyResult<Self> {
        let inner = CoreParams { rho0, v_wall, u_inf, mu, eta, a, gamma };
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rho0(&self) -> f64 {
        self.inner.rho0
    }
    #[getter]
    fn v_wall(&self) -> f64 {
        self.inner.v_wall
    }
    #[getter]
    fn u_inf(&self) -> f64 {
        self.inner.u_inf
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// Wall shear stress of the layer.
    fn drag(&self) -> PyResult<f64> {
        drag(&self.inner).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "IsentropicParams(rho0={}, v_wall={}, u_inf={}, mu={}, eta={}, a={}, gamma={})",
            p.rho0, p.v_wall, p.u_inf, p.mu, p.eta, p.a, p.gamma
        )
    }
}

/// Tabulated layer profile in conserved variables.
#[pyclass(module = "layerstab_py")]
pub struct Profile {
    inner: Arc<CoreProfile>,
    params: Option<CoreParams>,
}

#[pymethods]
impl Profile {
    /// Closed-form transverse layer (suction, `V < 0`).
    #[staticmethod]
    #[pyo3(signature = (params, x_max, nodes = 400))]
    fn explicit(params: PyRef<'_, IsentropicParams>, x_max: f64, nodes: usize) -> PyResult<Self> {
        let p = explicit_transverse(&params.inner, &layer_grid(x_max, nodes)).map_err(value_error)?;
        Ok(Self { inner: Arc::new(p), params: Some(params.inner) })
    }

    /// Shooting from the far state; the flow case follows the sign of `V`.
    #[staticmethod]
    #[pyo3(signature = (params, x_max = None, nodes = 400))]
    fn shoot(py: Python<'_>, params: PyRef<'_, IsentropicParams>, x_max: Option<f64>, nodes: usize) -> PyResult<Self> {
        let p = params.inner;
        let profile = py
            .detach(|| {
                let sys = build_isentropic_2d(p).map_err(|e| e.to_string())?;
                let case = if p.v_wall < 0.0 { FlowCase::Outflow } else { FlowCase::Inflow };
                let options = ShootingOptions { nodes, x_max, ..ShootingOptions::default() };
                solve_profile_with(&sys, &sys.end_state(), &WallConstraints::isentropic(&p, case), &options)
                    .map_err(|e| e.to_string())
            })
            .map_err(runtime_error)?;
        Ok(Self { inner: Arc::new(profile), params: Some(p) })
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.iter().map(to_vec).collect()
    }

    #[getter]
    fn theta_fit(&self) -> Option<f64> {
        self.inner.theta_fit
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.inner.amplitude()
    }

    /// Interpolated value and derivative at `x`.
    fn eval(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let (u, du) = self.inner.eval(x);
        (to_vec(&u), to_vec(&du))
    }

    #[pyo3(signature = (k_max = 2))]
    fn verify_decay<'py>(&self, py: Python<'py>, k_max: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &verify_decay(&self.inner, k_max).map_err(runtime_error)?)
    }

    fn __len__(&self) -> usize {
        self.inner.grid.len()
    }
}

/// Evans function of a layer problem or of a scalar test operator.
#[pyclass(module = "layerstab_py")]
pub struct EvansFunction {
    inner: CoreEvans,
    xi_tilde: Vec<f64>,
}

fn contour_result<'py>(py: Python<'py>, evans: &EvansFunction, contour: Contour) -> PyResult<Bound<'py, PyAny>> {
    let result = py
        .detach(|| winding_number(&evans.inner, &evans.xi_tilde, &contour, &WindingOptions::default()))
        .map_err(runtime_error)?;
    to_py(py, &result)
}

#[pymethods]
impl EvansFunction {
    #[staticmethod]
    #[pyo3(signature = (profile, xi_tilde, case = "outflow"))]
    fn layer(profile: PyRef<'_, Profile>, xi_tilde: Vec<f64>, case: &str) -> PyResult<Self> {
        let params = profile.params.ok_or_else(|| value_error("profile has no isentropic parameters"))?;
        let case = match case {
            "outflow" => FlowCase::Outflow,
            "inflow" => FlowCase::Inflow,
            other => return Err(value_error(format!("unknown flow case {other:?}"))),
        };
        let sys: Arc<dyn SystemDefinition> = Arc::new(build_isentropic_2d(params).map_err(value_error)?);
        let problem = LayerProblem::new(sys, profile.inner.clone(), xi_tilde.clone(), case).map_err(value_error)?;
        let inner = CoreEvans::new(Arc::new(problem), EvansOptions::default()).map_err(runtime_error)?;
        Ok(Self { inner, xi_tilde })
    }

    /// `u'' + 6 sech^2(x) u = lambda u` with Dirichlet data; its only eigenvalue is 1.
    #[staticmethod]
    #[pyo3(signature = (x_max = 20.0))]
    fn poschl_teller(x_max: f64) -> PyResult<Self> {
        let problem = Arc::new(ScalarProblem::poschl_teller(x_max));
        let inner = CoreEvans::new(problem, EvansOptions::default()).map_err(runtime_error)?;
        Ok(Self { inner, xi_tilde: Vec::new() })
    }

    fn __call__(&self, py: Python<'_>, lam: Complex64) -> PyResult<Complex64> {
        py.detach(|| self.inner.eval(lam)).map_err(runtime_error)
    }

    fn winding_circle<'py>(&self, py: Python<'py>, center: Complex64, radius: f64) -> PyResult<Bound<'py, PyAny>> {
        contour_result(py, self, Contour::circle(center, radius))
    }

    #[pyo3(signature = (radius, origin_ball = 0.0))]
    fn winding_semicircle<'py>(&self, py: Python<'py>, radius: f64, origin_ball: f64) -> PyResult<Bound<'py, PyAny>> {
        contour_result(py, self, Contour::semicircle(radius, origin_ball))
    }

    /// Zero of `D` on the segment `[a, b]` by secant steps.
    #[pyo3(signature = (a, b, tol = 1e-10))]
    fn find_zero(&self, py: Python<'_>, a: Complex64, b: Complex64, tol: f64) -> PyResult<Complex64> {
        py.detach(|| self.inner.find_zero(a, b, tol)).map_err(runtime_error)
    }
}

/// Winding and margin audit on the semicircle for each frequency in `xi_grid`.
/// The origin ball is cut out only at `xi = 0`.
#[pyfunction]
#[pyo3(signature = (profile, xi_grid, radius = 10.0, origin_ball = 1e-3, margin_tol = 1e-8))]
fn condition_d<'py>(
    py: Python<'py>,
    profile: PyRef<'_, Profile>,
    xi_grid: Vec<f64>,
    radius: f64,
    origin_ball: f64,
    margin_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = profile.params.ok_or_else(|| value_error("profile has no isentropic parameters"))?;
    let sys: Arc<dyn SystemDefinition> = Arc::new(build_isentropic_2d(params).map_err(value_error)?);
    let shape = profile.inner.clone();
    let reports = py.detach(|| {
        let make = |xi: &[f64]| {
            let problem = LayerProblem::new(sys.clone(), shape.clone(), xi.to_vec(), FlowCase::Outflow)?;
            CoreEvans::new(Arc::new(problem), EvansOptions::default())
        };
        xi_grid
            .iter()
            .map(|&xi| {
                let ball = if xi == 0.0 { origin_ball } else { 0.0 };
                let contour = Contour::semicircle(radius, ball);
                check_condition_d(make, &[vec![xi]], &contour, &WindingOptions::default(), margin_tol)
            })
            .collect::<Vec<_>>()
    });
    to_py(py, &reports)
}

/// Model built from its JSON description, e.g.
/// `{"model": "isentropic2d", "params": {...}}`.
#[pyclass(module = "layerstab_py")]
pub struct Model {
    inner: BuiltModel,
}

#[pymethods]
impl Model {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(spec).map_err(value_error)?;
        Ok(Self { inner: spec.build().map_err(value_error)? })
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.system.size()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.system.dimension()
    }

    /// Structural hypothesis audit at the end and wall states.
    #[pyo3(signature = (directions = 128))]
    fn hypotheses<'py>(&self, py: Python<'py>, directions: usize) -> PyResult<Bound<'py, PyAny>> {
        let m = &self.inner;
        let sys = m.system.as_ref();
        let report = py.detach(|| {
            let mut report = HypothesisReport::new(sys.name());
            report.merge(check_structure(sys, &[m.end_state.u_plus.clone(), m.wall_state.clone()], directions));
            let class = check_noncharacteristic(sys, &m.end_state, &m.wall_state);
            report.h1 = Some(class.verdict);
            report.case = class.case;
            report.merge(check_hyperbolicity(sys, &m.end_state));
            report.merge(check_constant_multiplicity(sys, &m.end_state, directions));
            report.merge(check_genuine_coupling(sys, &m.end_state, directions));
            report
        });
        to_py(py, &report)
    }

    /// Compensating matrix at the symmetric state `w` for direction `xi`.
    fn kawashima<'py>(&self, py: Python<'py>, w: Vec<f64>, xi: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let sys = self.inner.system.as_ref();
        if w.len() != sys.size() || xi.len() != sys.dimension() {
            return Err(value_error(format!("need {} state components and {} directions", sys.size(), sys.dimension())));
        }
        let k = kawashima_k(sys, &RVector::from_vec(w), &xi).map_err(runtime_error)?;
        to_py(py, &k)
    }
}

/// Parameter sweep; `grid` and `options` are JSON strings.
#[pyfunction]
#[pyo3(signature = (grid, options = None, parallel = true))]
fn sweep<'py>(py: Python<'py>, grid: &str, options: Option<&str>, parallel: bool) -> PyResult<Bound<'py, PyAny>> {
    let grid: SweepGrid = serde_json::from_str(grid).map_err(value_error)?;
    let options: SweepOptions = match options {
        Some(text) => serde_json::from_str(text).map_err(value_error)?,
        None => SweepOptions::default(),
    };
    let points = grid.points();
    let rows = py.detach(|| run_sweep(&points, &options, parallel));
    to_py(py, &rows)
}

/// Decay rate of the periodic shear-layer mode with wavenumber `k`.
#[pyfunction]
#[pyo3(signature = (rho, m, mu, k, nodes = 128))]
fn shear_rate(py: Python<'_>, rho: f64, m: f64, mu: f64, k: f64, nodes: usize) -> PyResult<f64> {
    py.detach(|| periodic_shear_rate(rho, m, mu, k, nodes)).map_err(runtime_error)
}

#[pymodule]
fn layerstab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<IsentropicParams>()?;
    m.add_class::<Profile>()?;
    m.add_class::<EvansFunction>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(condition_d, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(shear_rate, m)?)?;
    Ok(())
}
