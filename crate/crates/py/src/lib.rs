//! Python bindings: domains, proper maps, orthonormal bases, Friedrichs runs
//! and identity checks. Reports come back as plain dicts.

use clap::ValueEnum;
use friedrichs_core::bergman::{build_basis, FeatureSpace, OrthonormalBasis, DEFAULT_TAU};
use friedrichs_core::cli::{verify_identity, IdentityArg};
use friedrichs_core::domains::{DomainSpec, SamplerConfig};
use friedrichs_core::maps::ProperMapSpec;
use friedrichs_core::numerics::C64;
use friedrichs_core::quadrature::{self, Weight};
use friedrichs_core::verify::{run_friedrichs_experiment, IdentityReport, RunSettings, FIBER_TOL};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: friedrichs_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn settings(samples: usize, seed: u64, sequence: &str) -> PyResult<RunSettings> {
    RunSettings::new(samples, seed, sequence).map_err(py_err)
}

fn to_dict<'py>(py: Python<'py>, r: &IdentityReport) -> PyResult<Bound<'py, PyAny>> {
    let text = r.to_json().map_err(py_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Domain", module = "friedrichs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDomain {
    inner: DomainSpec,
}

#[pymethods]
impl PyDomain {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(py_err)? })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn contains(&self, point: Vec<C64>) -> PyResult<bool> {
        self.inner.contains(&point).map_err(py_err)
    }

    /// `(volume, stderr)`.
    #[pyo3(signature = (samples = 1 << 20, seed = 1, sequence = "halton"))]
    fn volume(&self, py: Python<'_>, samples: usize, seed: u64, sequence: &str) -> PyResult<(f64, f64)> {
        let cfg = settings(samples, seed, sequence)?.stream(0).map_err(py_err)?;
        let d = self.inner.clone();
        let v = py.detach(move || quadrature::volume(&d, &cfg)).map_err(py_err)?;
        Ok((v.value.re, v.stderr_re))
    }

    fn __repr__(&self) -> String {
        format!("Domain('{}')", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[pyclass(name = "ProperMap", module = "friedrichs", frozen)]
struct PyProperMap {
    inner: ProperMapSpec,
}

#[pymethods]
impl PyProperMap {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(py_err)? })
    }

    #[getter]
    fn source(&self) -> PyDomain {
        PyDomain { inner: self.inner.source().clone() }
    }

    #[getter]
    fn target(&self) -> PyDomain {
        PyDomain { inner: self.inner.target().clone() }
    }

    #[getter]
    fn multiplicity(&self) -> usize {
        self.inner.multiplicity()
    }

    fn apply(&self, z: Vec<C64>) -> PyResult<Vec<C64>> {
        self.inner.apply(&z).map_err(py_err)
    }

    fn jacobian(&self, z: Vec<C64>) -> PyResult<C64> {
        if z.len() != self.inner.dimension() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.dimension())));
        }
        Ok(self.inner.jacobian(&z))
    }

    /// Images of `z` under every deck transformation.
    fn orbit(&self, z: Vec<C64>) -> PyResult<Vec<Vec<C64>>> {
        if z.len() != self.inner.dimension() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.dimension())));
        }
        Ok(self.inner.deck_transforms().iter().map(|d| d.apply(&z)).collect())
    }

    #[pyo3(signature = (w, tol = FIBER_TOL))]
    fn preimages(&self, w: Vec<C64>, tol: f64) -> PyResult<Vec<Vec<C64>>> {
        Ok(self.inner.preimages(&w, tol).map_err(py_err)?.preimages)
    }

    fn __repr__(&self) -> String {
        format!("ProperMap('{}')", self.inner)
    }
}

/// Orthonormal basis of the degree-truncated Bergman space, optionally
/// weighted by `|J map|²`.
#[pyclass(name = "OrthonormalBasis", module = "friedrichs", frozen)]
struct PyOrthonormalBasis {
    inner: OrthonormalBasis,
}

#[pymethods]
impl PyOrthonormalBasis {
    #[new]
    #[pyo3(signature = (domain, degree, samples = 1 << 20, seed = 1, sequence = "halton", weight = None))]
    fn new(
        py: Python<'_>,
        domain: &PyDomain,
        degree: usize,
        samples: usize,
        seed: u64,
        sequence: &str,
        weight: Option<&PyProperMap>,
    ) -> PyResult<Self> {
        let cfg: SamplerConfig = settings(samples, seed, sequence)?.stream(0).map_err(py_err)?;
        let d = domain.inner.clone();
        let w = match weight {
            Some(m) if m.inner.source() == &d => Weight::JacobianSq(m.inner.clone()),
            Some(m) => return Err(PyValueError::new_err(format!("weight map {} is not defined on {d}", m.inner))),
            None => Weight::Unweighted,
        };
        let inner = py
            .detach(move || OrthonormalBasis::build(&d, &FeatureSpace::monomials(build_basis(&d, degree)), &w, &cfg))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Exponents of the monomials kept by the pivoted factorization.
    #[getter]
    fn retained(&self) -> Vec<Vec<i32>> {
        let e = self.inner.space.basis.exponents();
        self.inner.retained.iter().map(|&i| e[i].clone()).collect()
    }

    fn eval(&self, z: Vec<C64>) -> PyResult<Vec<C64>> {
        self.check(&z)?;
        Ok(self.inner.eval(&z))
    }

    /// Truncated kernel `Σ e_j(z) conj(e_j(w))`.
    fn kernel(&self, z: Vec<C64>, w: Vec<C64>) -> PyResult<C64> {
        self.check(&z)?;
        self.check(&w)?;
        Ok(self.inner.kernel(&z, &w))
    }
}

impl PyOrthonormalBasis {
    fn check(&self, z: &[C64]) -> PyResult<()> {
        let n = self.inner.domain.dimension();
        if z.len() != n {
            return Err(PyValueError::new_err(format!("expected {n} coordinates, got {}", z.len())));
        }
        Ok(())
    }
}

/// Friedrichs rank experiment; returns the report dict.
#[pyfunction(name = "friedrichs")]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (domain, degree, tau = DEFAULT_TAU, samples = 1 << 20, seed = 1, sequence = "halton", exploratory = false))]
fn friedrichs_run<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    degree: usize,
    tau: f64,
    samples: usize,
    seed: u64,
    sequence: &str,
    exploratory: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let run = settings(samples, seed, sequence)?;
    let d = domain.inner.clone();
    let r = py
        .detach(move || run_friedrichs_experiment(&d, degree, tau, exploratory, &run))
        .map_err(py_err)?;
    to_dict(py, &r)
}

/// One identity check (`cov`, `projection`, `kernel-transform`,
/// `bergman-projection`, `weighted-rankone`); returns the report dict.
#[pyfunction(name = "verify")]
#[pyo3(signature = (identity, map, degree = None, points = None, tau = DEFAULT_TAU, function = None, samples = 1 << 20, seed = 1, sequence = "halton"))]
#[allow(clippy::too_many_arguments)]
fn verify_run<'py>(
    py: Python<'py>,
    identity: &str,
    map: &PyProperMap,
    degree: Option<usize>,
    points: Option<usize>,
    tau: f64,
    function: Option<String>,
    samples: usize,
    seed: u64,
    sequence: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let id = IdentityArg::from_str(identity, true).map_err(PyValueError::new_err)?;
    let run = settings(samples, seed, sequence)?;
    let m = map.inner.clone();
    let r = py
        .detach(move || verify_identity(id, &m, degree, points, tau, function.as_deref(), &run))
        .map_err(py_err)?;
    to_dict(py, &r)
}

#[pymodule]
#[pyo3(name = "friedrichs")]
fn friedrichs_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyProperMap>()?;
    m.add_class::<PyOrthonormalBasis>()?;
    m.add_function(wrap_pyfunction!(friedrichs_run, m)?)?;
    m.add_function(wrap_pyfunction!(verify_run, m)?)?;
    Ok(())
}
