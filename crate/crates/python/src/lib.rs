//! Python bindings.
//!
//! Sites are passed as `(i, j)` tuples and directions as the labels
//! `"+e1"`, `"-e1"`, `"+e2"`, `"-e2"`.

use ::crack_lattice as cl;
use cl::crack_solver::{self, CrackError};
use cl::dislocation::{self, Core, DislocationConfig, DislocationError};
use cl::energy::EnergyModel;
use cl::greens::{self, GreensError};
use cl::lattice::{Bond, Direction, DualSite, PrimalSite};
use cl::verify::{run_suite, VerifyConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::fs::File;

create_exception!(crack_lattice, BifurcationError, PyRuntimeError);
create_exception!(crack_lattice, ConvergenceError, PyRuntimeError);

fn green_err(e: GreensError) -> PyErr {
    match e {
        GreensError::Solver(_) => ConvergenceError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dislocation_err(e: DislocationError) -> PyErr {
    match e {
        DislocationError::Green(g) => green_err(g),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn crack_err(e: CrackError) -> PyErr {
    match e {
        CrackError::Bifurcation { .. } => BifurcationError::new_err(e.to_string()),
        CrackError::NotConverged { .. } | CrackError::Solver(_) => {
            ConvergenceError::new_err(e.to_string())
        }
        CrackError::Dislocation(d) => dislocation_err(d),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn direction(label: &str) -> PyResult<Direction> {
    Direction::from_label(label)
        .ok_or_else(|| PyValueError::new_err(format!("unknown direction {label:?}")))
}

fn config(cores: Vec<(i32, i32, i32)>) -> PyResult<DislocationConfig> {
    DislocationConfig::new(
        cores
            .into_iter()
            .map(|(x, y, b)| Core { x, y, b })
            .collect(),
    )
    .map_err(dislocation_err)
}

/// Potential kernel `a(i, j)` of the square lattice.
#[pyfunction]
fn potential_kernel(i: i64, j: i64) -> f64 {
    greens::potential_kernel((i, j))
}

/// The same kernel by numerical quadrature.
#[pyfunction]
fn potential_kernel_quadrature(i: i64, j: i64) -> f64 {
    greens::potential_kernel_quadrature((i, j))
}

#[pyfunction]
fn boundary_difference(source: (i32, i32), rho: &str) -> PyResult<f64> {
    greens::boundary_difference(DualSite::new(source.0, source.1), direction(rho)?)
        .map_err(green_err)
}

/// `K √r sin(θ/2)` at primal site `(i, j)`.
#[pyfunction]
fn predictor(k: f64, i: i32, j: i32) -> f64 {
    crack_solver::predictor(k, PrimalSite::new(i, j))
}

#[pyclass(name = "GreensField", frozen)]
struct PyGreensField {
    inner: greens::GreensField,
}

#[pymethods]
impl PyGreensField {
    #[getter]
    fn source(&self) -> (i32, i32) {
        (self.inner.source.i, self.inner.source.j)
    }

    #[getter]
    fn radius(&self) -> i32 {
        self.inner.radius
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.solve_residual
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn value(&self, i: i32, j: i32) -> Option<f64> {
        self.inner.value(DualSite::new(i, j))
    }

    /// All stored values as `(i, j, value)`.
    fn values(&self) -> Vec<(i32, i32, f64)> {
        self.inner
            .values
            .iter()
            .map(|(l, v)| (l.i, l.j, v))
            .collect()
    }

    /// Constant of the decay envelope.
    fn decay_constant(&self) -> f64 {
        greens::decay_envelope(&self.inner).c_max
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        cl::io::write_green_csv(&self.inner, f).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "GreensField(source={:?}, radius={}, residual={:e})",
            self.source(),
            self.inner.radius,
            self.inner.solve_residual
        )
    }
}

/// Crack Green's function with source `source` on the disk of `radius`.
#[pyfunction]
#[pyo3(signature = (source, radius, tol = 1e-10))]
fn solve_green(
    py: Python<'_>,
    source: (i32, i32),
    radius: i32,
    tol: f64,
) -> PyResult<PyGreensField> {
    let s = DualSite::new(source.0, source.1);
    let inner = py
        .detach(|| greens::solve_crack_green(s, radius, tol))
        .map_err(green_err)?;
    Ok(PyGreensField { inner })
}

#[pyclass(name = "DislocationEquilibrium", frozen)]
struct PyDislocation {
    inner: dislocation::DislocationEquilibrium,
}

#[pymethods]
impl PyDislocation {
    #[getter]
    fn radius(&self) -> i32 {
        self.inner.radius
    }

    /// Sum of the strain around the plaquette at dual site `(i, j)`;
    /// `None` on the crack or outside the window.
    fn winding(&self, i: i32, j: i32) -> Option<f64> {
        dislocation::plaquette_winding(&self.inner.strain, DualSite::new(i, j)).value()
    }

    fn divergence(&self, i: i32, j: i32) -> Option<f64> {
        dislocation::site_divergence(&self.inner.strain, PrimalSite::new(i, j))
    }

    fn strain(&self, i: i32, j: i32, dir: &str) -> PyResult<Option<f64>> {
        Ok(self
            .inner
            .strain
            .get(Bond::new(PrimalSite::new(i, j), direction(dir)?)))
    }

    fn displacement(&self, i: i32, j: i32) -> Option<f64> {
        self.inner.displacement.get(PrimalSite::new(i, j))
    }

    /// Largest `|strain|` within half the radius.
    fn strain_max(&self) -> f64 {
        self.inner
            .strain
            .max_abs_in(cl::primal::Window::new(self.inner.radius as f64 / 2.0))
    }
}

/// Dislocation-only equilibrium for cores given as `(x, y, b)`.
#[pyfunction]
#[pyo3(signature = (cores, radius, tol = 1e-12))]
fn dislocate(
    py: Python<'_>,
    cores: Vec<(i32, i32, i32)>,
    radius: i32,
    tol: f64,
) -> PyResult<PyDislocation> {
    let cfg = config(cores)?;
    let inner = py
        .detach(|| dislocation::dislocation_equilibrium(&cfg, radius, tol))
        .map_err(dislocation_err)?;
    Ok(PyDislocation { inner })
}

#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: crack_solver::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    #[allow(non_snake_case)]
    fn K(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual_max
    }

    #[getter]
    fn margin(&self) -> f64 {
        self.inner.margin
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn energy_history(&self) -> Vec<f64> {
        self.inner.energy_history.clone()
    }

    fn displacement(&self, i: i32, j: i32) -> Option<f64> {
        self.inner.y.get(PrimalSite::new(i, j))
    }

    fn corrector(&self, i: i32, j: i32) -> Option<f64> {
        self.inner.u.get(PrimalSite::new(i, j))
    }

    /// `(k, opening)` for `k = 0..=k_max`.
    fn opening_profile(&self, k_max: usize) -> PyResult<Vec<(usize, f64)>> {
        crack_solver::crack_opening_profile(&self.inner.y, k_max).map_err(crack_err)
    }

    /// Power-law fit of the opening over `k_min..=k_max`; returns
    /// `(K_est, exponent)`.
    fn fit_opening(&self, k_min: usize, k_max: usize) -> PyResult<(f64, f64)> {
        let profile = self.opening_profile(k_max)?;
        let fit = crack_solver::fit_opening(&profile, k_min..=k_max).map_err(crack_err)?;
        Ok((fit.k_est, fit.exponent))
    }
}

/// Equilibrium of crack opening `K` plus dislocations.
#[pyfunction]
#[pyo3(signature = (cores, k, radius, tol = 1e-10, max_iter = 200, lam = 1.0))]
fn equilibrate(
    py: Python<'_>,
    cores: Vec<(i32, i32, i32)>,
    k: f64,
    radius: i32,
    tol: f64,
    max_iter: usize,
    lam: f64,
) -> PyResult<PySolution> {
    let cfg = config(cores)?;
    let model = EnergyModel::new(lam).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let inner = py
        .detach(|| crack_solver::equilibrate(&cfg, k, radius, tol, max_iter, &model))
        .map_err(crack_err)?;
    Ok(PySolution { inner })
}

/// Runs the verification suite and returns its JSON report.
#[pyfunction]
#[pyo3(signature = (radius = 256, seed = 0))]
fn verify(py: Python<'_>, radius: i32, seed: u64) -> String {
    let cfg = VerifyConfig {
        radius,
        seed,
        ..VerifyConfig::default()
    };
    py.detach(|| run_suite(cfg, |_, _| {}).to_json())
}

#[pymodule]
#[pyo3(name = "crack_lattice")]
fn crack_lattice_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BifurcationError", m.py().get_type::<BifurcationError>())?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_class::<PyGreensField>()?;
    m.add_class::<PyDislocation>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(potential_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(potential_kernel_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_difference, m)?)?;
    m.add_function(wrap_pyfunction!(predictor, m)?)?;
    m.add_function(wrap_pyfunction!(solve_green, m)?)?;
    m.add_function(wrap_pyfunction!(dislocate, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
