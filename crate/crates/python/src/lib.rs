//! Python bindings. Reports come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use sublinpot::conditions::{evaluate_conditions, solution_exponents, sufficient_exponents};
use sublinpot::energy::energy_identity_check;
use sublinpot::lorentz::lorentz_norm;
use sublinpot::potentials::{
    default_candidates, intrinsic_potential as core_intrinsic, kappa_ball as core_kappa,
    potential_at as core_potential_at, GridOperator, IntrinsicOptions,
};
use sublinpot::solver::{residual as core_residual, solve_minimal as core_solve};
use sublinpot::{fixtures, Normalization};

fn err(e: sublinpot::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "BoxGrid", frozen)]
struct PyBoxGrid {
    inner: sublinpot::BoxGrid,
}

#[pymethods]
impl PyBoxGrid {
    /// Cell-centered grid: `origin` is the center of the first cell.
    #[new]
    fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::BoxGrid::new(origin, spacing, shape).map_err(err)?,
        })
    }

    #[staticmethod]
    fn centered(center: Vec<f64>, spacing: f64, shape: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::BoxGrid::centered(&center, spacing, shape).map_err(err)?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn origin(&self) -> Vec<f64> {
        self.inner.origin().to_vec()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "BoxGrid(origin={:?}, spacing={}, shape={:?})",
            self.inner.origin(),
            self.inner.spacing(),
            self.inner.shape()
        )
    }
}

#[pyclass(name = "GridFunction", frozen)]
struct PyGridFunction {
    inner: sublinpot::GridFunction,
}

#[pymethods]
impl PyGridFunction {
    /// Values in row-major order.
    #[new]
    fn new(grid: &PyBoxGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::GridFunction::new(grid.inner.clone(), values).map_err(err)?,
        })
    }

    #[getter]
    fn grid(&self) -> PyBoxGrid {
        PyBoxGrid {
            inner: self.inner.grid().clone(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }
}

#[pyclass(name = "KernelSpec", frozen)]
struct PyKernelSpec {
    inner: sublinpot::KernelSpec,
}

#[pymethods]
impl PyKernelSpec {
    /// `normalization` is "classical" or "unit".
    #[staticmethod]
    #[pyo3(signature = (n, alpha, normalization = "classical"))]
    fn riesz(n: usize, alpha: f64, normalization: &str) -> PyResult<Self> {
        let norm = match normalization {
            "classical" => Normalization::Classical,
            "unit" => Normalization::Unit,
            other => {
                return Err(PyValueError::new_err(format!(
                    "normalization: unknown `{other}`"
                )))
            }
        };
        Ok(Self {
            inner: sublinpot::KernelSpec::riesz_with(n, alpha, norm).map_err(err)?,
        })
    }

    #[staticmethod]
    fn green_ball(n: usize, center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::KernelSpec::green_ball(n, center, radius).map_err(err)?,
        })
    }

    #[staticmethod]
    fn green_half_space(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::KernelSpec::green_half_space(n).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (points, entries, wmp_h = 1.0))]
    fn matrix(points: Vec<Vec<f64>>, entries: Vec<Vec<f64>>, wmp_h: f64) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::KernelSpec::matrix(points, entries, wmp_h).map_err(err)?,
        })
    }

    fn eval(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x, &y).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn order(&self) -> Option<f64> {
        self.inner.riesz_order()
    }

    #[getter]
    fn wmp_h(&self) -> f64 {
        self.inner.wmp_h()
    }
}

#[pyclass(name = "Measure", frozen, from_py_object)]
#[derive(Clone)]
struct PyMeasure {
    inner: sublinpot::Measure,
}

#[pymethods]
impl PyMeasure {
    #[staticmethod]
    fn zero(dim: usize) -> Self {
        Self {
            inner: sublinpot::Measure::zero(dim),
        }
    }

    /// `atoms` is a list of `(location, mass)` pairs.
    #[staticmethod]
    fn from_atoms(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::Measure::from_atoms(dim, atoms).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_density(density: &PyGridFunction) -> PyResult<Self> {
        Ok(Self {
            inner: sublinpot::Measure::from_density(density.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn bump(grid: &PyBoxGrid, center: Vec<f64>, radius: f64, height: f64) -> PyResult<Self> {
        Ok(Self {
            inner: fixtures::bump(&grid.inner, &center, radius, height).map_err(err)?,
        })
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn restrict_to_ball(&self, center: Vec<f64>, radius: f64) -> Self {
        Self {
            inner: self.inner.restrict_to_ball(&center, radius),
        }
    }

    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.scaled(factor).map_err(err)?,
        })
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: sublinpot::ProblemSpec,
}

#[pymethods]
impl PyProblem {
    /// `terms` is a list of `(sigma, q)` pairs.
    #[new]
    fn new(
        kernel: &PyKernelSpec,
        terms: Vec<(PyMeasure, f64)>,
        omega: &PyMeasure,
        gamma: f64,
        grid: &PyBoxGrid,
    ) -> PyResult<Self> {
        let terms = terms
            .into_iter()
            .map(|(s, q)| sublinpot::Term { sigma: s.inner, q })
            .collect();
        Ok(Self {
            inner: sublinpot::ProblemSpec::new(
                kernel.inner.clone(),
                terms,
                omega.inner.clone(),
                gamma,
                grid.inner.clone(),
            )
            .map_err(err)?,
        })
    }

    /// Built-in problems: "two-term", "one-term", "scalar", "green-ball".
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let p = fixtures::by_name(name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown fixture `{name}`")))?
            .map_err(err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn grid(&self) -> PyBoxGrid {
        PyBoxGrid {
            inner: self.inner.grid().clone(),
        }
    }

    #[getter]
    fn kernel(&self) -> PyKernelSpec {
        PyKernelSpec {
            inner: self.inner.kernel().clone(),
        }
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
}

#[pyfunction]
fn potential_at(k: &PyKernelSpec, m: &PyMeasure, x: Vec<f64>) -> f64 {
    core_potential_at(&k.inner, &m.inner, &x)
}

/// Potential of a density measure on its own grid.
#[pyfunction]
fn potential_on_grid(k: &PyKernelSpec, m: &PyMeasure) -> PyResult<PyGridFunction> {
    let d = m
        .inner
        .density()
        .ok_or_else(|| PyValueError::new_err("measure has no density part"))?;
    let op = GridOperator::new(&k.inner, d.grid()).map_err(err)?;
    Ok(PyGridFunction {
        inner: op.apply_fn(d).map_err(err)?,
    })
}

/// Returns `(solution, report)`.
#[pyfunction]
#[pyo3(signature = (problem, tol, max_iter = 200))]
fn solve_minimal<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PyGridFunction, Bound<'py, PyAny>)> {
    let (u, rep) = py
        .detach(|| core_solve(&problem.inner, tol, max_iter))
        .map_err(err)?;
    Ok((PyGridFunction { inner: u }, to_py(py, &rep)?))
}

#[pyfunction]
fn residual(problem: &PyProblem, u: &PyGridFunction) -> PyResult<f64> {
    core_residual(&problem.inner, &u.inner).map_err(err)
}

#[pyfunction]
fn conditions<'py>(py: Python<'py>, problem: &PyProblem) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &evaluate_conditions(&problem.inner).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (problem, u, extension = 8))]
fn energy_identity<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    u: &PyGridFunction,
    extension: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &energy_identity_check(&problem.inner, &u.inner, extension).map_err(err)?,
    )
}

#[pyfunction]
fn lorentz(f: &PyGridFunction, r: f64, rho: f64) -> PyResult<f64> {
    let pair = sublinpot::LorentzPair::new(r, rho).map_err(err)?;
    lorentz_norm(&f.inner, pair).map_err(err)
}

/// `(r, rho)` of the solution space.
#[pyfunction]
fn exponents(gamma: f64, alpha: f64, n: usize) -> PyResult<(f64, f64)> {
    let p = solution_exponents(gamma, alpha, n).map_err(err)?;
    Ok((p.r, p.rho))
}

#[pyfunction]
fn data_exponents<'py>(
    py: Python<'py>,
    gamma: f64,
    qs: Vec<f64>,
    alpha: f64,
    n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &sufficient_exponents(gamma, &qs, alpha, n).map_err(err)?,
    )
}

/// Frank–Wolfe lower bound for `kappa` of `sigma_b`; candidates default to
/// the cells around its support.
#[pyfunction]
#[pyo3(signature = (k, sigma_b, q, candidates = None, budget = 200))]
fn kappa_ball<'py>(
    py: Python<'py>,
    k: &PyKernelSpec,
    sigma_b: &PyMeasure,
    q: f64,
    candidates: Option<Vec<Vec<f64>>>,
    budget: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cands = candidates.unwrap_or_else(|| default_candidates(&sigma_b.inner, 2));
    to_py(
        py,
        &core_kappa(&k.inner, &sigma_b.inner, q, &cands, budget).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (k, sigma, q, x, r_count = 64, budget = 200))]
fn intrinsic_potential(
    k: &PyKernelSpec,
    sigma: &PyMeasure,
    q: f64,
    x: Vec<f64>,
    r_count: usize,
    budget: usize,
) -> PyResult<f64> {
    let opts = IntrinsicOptions {
        r_count,
        budget,
        ..Default::default()
    };
    Ok(core_intrinsic(&k.inner, &sigma.inner, q, &x, &opts)
        .map_err(err)?
        .value)
}

#[pymodule]
#[pyo3(name = "sublinpot")]
fn sublinpot_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBoxGrid>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PyKernelSpec>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(potential_at, m)?)?;
    m.add_function(wrap_pyfunction!(potential_on_grid, m)?)?;
    m.add_function(wrap_pyfunction!(solve_minimal, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(conditions, m)?)?;
    m.add_function(wrap_pyfunction!(energy_identity, m)?)?;
    m.add_function(wrap_pyfunction!(lorentz, m)?)?;
    m.add_function(wrap_pyfunction!(exponents, m)?)?;
    m.add_function(wrap_pyfunction!(data_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_ball, m)?)?;
    m.add_function(wrap_pyfunction!(intrinsic_potential, m)?)?;
    Ok(())
}
