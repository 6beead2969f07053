//! Python bindings for `atlas_core`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use atlas_core::complexity::{self as cx, Method};
use atlas_core::freeconv::{self as fcv, GridSpec};
use atlas_core::mde::{self, MdeModel};
use atlas_core::montecarlo::{self as mc, CorrelatorSpec, SamplerConfig};
use atlas_core::{measures, AtlasError};

create_exception!(atlas, NumericalError, PyException);

fn to_py(e: AtlasError) -> PyErr {
    match e {
        AtlasError::InvalidInput(m) => PyValueError::new_err(m),
        other => NumericalError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for atlas_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse_method(method: &str) -> PyResult<Method> {
    match method {
        "closed_form" => Ok(Method::ClosedForm),
        "variational" => Ok(Method::Variational),
        other => Err(PyValueError::new_err(format!(
            "method must be 'closed_form' or 'variational', got {other:?}"
        ))),
    }
}

/// Finitely supported probability measure.
#[pyclass(name = "DiscreteMeasure", frozen)]
struct PyMeasure {
    inner: measures::DiscreteMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(atoms: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure { inner: measures::DiscreteMeasure::new(atoms, weights).py_err()? })
    }

    #[staticmethod]
    fn delta(mu: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: measures::DiscreteMeasure::delta(mu).py_err()? })
    }

    #[staticmethod]
    fn uniform(atoms: Vec<f64>) -> PyResult<Self> {
        Ok(PyMeasure { inner: measures::DiscreteMeasure::uniform(atoms).py_err()? })
    }

    /// Quantile discretization of a semicircle.
    #[staticmethod]
    fn semicircle(mean: f64, variance: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: measures::DiscreteMeasure::semicircle(mean, variance).py_err()? })
    }

    /// Spectrum of `mu0 - t0 * Laplacian` on the periodic lattice.
    #[staticmethod]
    fn lattice(lattice: &PyLattice) -> PyResult<Self> {
        Ok(PyMeasure { inner: measures::laplacian_spectrum(&lattice.inner, true).py_err()? })
    }

    #[getter]
    fn atoms(&self) -> Vec<f64> {
        self.inner.atoms().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteMeasure({} atoms in [{}, {}])", self.inner.len(), self.inner.min_atom(), self.inner.max_atom())
    }
}

#[pyclass(name = "LatticeSpec", frozen)]
struct PyLattice {
    inner: measures::LatticeSpec,
}

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (l, d, t0, mu0 = 0.0))]
    fn new(l: usize, d: usize, t0: f64, mu0: f64) -> PyResult<Self> {
        Ok(PyLattice { inner: measures::LatticeSpec::new(l, d, t0, mu0).py_err()? })
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.sites()
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!("LatticeSpec(L={}, d={}, t0={}, mu0={})", s.l, s.d, s.t0, s.mu0)
    }
}

/// `rho_sc(t) ⊞ mu`.
#[pyclass(name = "FreeConvolution", frozen)]
struct PyFreeConvolution {
    inner: fcv::FreeConvolution,
}

#[pymethods]
impl PyFreeConvolution {
    #[new]
    fn new(mu: &PyMeasure, t: f64) -> PyResult<Self> {
        Ok(PyFreeConvolution { inner: fcv::FreeConvolution::new(&mu.inner, t).py_err()? })
    }

    fn stieltjes(&self, z: Complex64) -> PyResult<Complex64> {
        self.inner.stieltjes(z).py_err()
    }

    fn density_at(&self, x: f64) -> PyResult<f64> {
        self.inner.density_at(x).py_err()
    }

    fn log_potential(&self, u: f64) -> PyResult<f64> {
        self.inner.log_potential(u).py_err()
    }

    #[getter]
    fn left_edge(&self) -> f64 {
        self.inner.left_edge()
    }

    #[getter]
    fn right_edge(&self) -> f64 {
        self.inner.right_edge()
    }

    fn gaps(&self) -> Vec<(f64, f64)> {
        self.inner.gaps()
    }

    /// `(x, rho)` on a uniform grid; the default grid pads the support by 10%.
    #[pyo3(signature = (grid_min = None, grid_max = None, n = None))]
    fn density(&self, grid_min: Option<f64>, grid_max: Option<f64>, n: Option<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let g = self.inner.default_grid();
        let grid = GridSpec::new(grid_min.unwrap_or(g.min), grid_max.unwrap_or(g.max), n.unwrap_or(g.n)).py_err()?;
        let d = fcv::density(self.inner.base(), self.inner.variance(), grid).py_err()?;
        Ok((d.nodes().collect(), d.values().to_vec()))
    }
}

#[pyclass(name = "ComplexityResult", frozen, get_all)]
struct PyComplexity {
    sigma_tot: f64,
    sigma_min: f64,
    u_star_tot: f64,
    u_star_min: f64,
    phase: String,
    threshold: f64,
    c: Option<f64>,
    v: Option<f64>,
}

#[pymethods]
impl PyComplexity {
    fn __repr__(&self) -> String {
        format!("ComplexityResult(sigma_tot={}, sigma_min={}, phase={})", self.sigma_tot, self.sigma_min, self.phase)
    }
}

impl From<cx::ComplexityResult> for PyComplexity {
    fn from(r: cx::ComplexityResult) -> Self {
        PyComplexity {
            sigma_tot: r.sigma_tot,
            sigma_min: r.sigma_min,
            u_star_tot: r.u_star_tot,
            u_star_min: r.u_star_min,
            phase: r.phase.to_string(),
            threshold: r.threshold,
            c: r.aux.map(|a| a.c),
            v: r.aux.map(|a| a.v),
        }
    }
}

#[pyfunction]
fn t_critical(mu: &PyMeasure) -> PyResult<f64> {
    cx::t_critical(&mu.inner).py_err()
}

#[pyfunction]
fn larkin_mass(lattice: &PyLattice, b: f64) -> PyResult<f64> {
    cx::larkin_mass(&lattice.inner, b).py_err()
}

#[pyfunction]
fn b_critical(lattice: &PyLattice) -> PyResult<f64> {
    cx::b_critical(&lattice.inner).py_err()
}

/// Soft-spin complexity.
#[pyfunction]
#[pyo3(signature = (mu, t, method = "closed_form"))]
fn complexity(mu: &PyMeasure, t: f64, method: &str) -> PyResult<PyComplexity> {
    let model = cx::SoftSpinModel::new(mu.inner.clone(), t).py_err()?;
    Ok(cx::sigma_soft_spins(&model, parse_method(method)?).py_err()?.into())
}

#[pyfunction]
#[pyo3(signature = (lattice, b, method = "closed_form"))]
fn elastic_complexity(lattice: &PyLattice, b: f64, method: &str) -> PyResult<PyComplexity> {
    let model = cx::ElasticManifoldModel::new(lattice.inner, b).py_err()?;
    Ok(cx::sigma_elastic(&model, parse_method(method)?).py_err()?.into())
}

/// `(c_tot, c_min)`.
#[pyfunction]
fn near_critical_constants(mu: &PyMeasure) -> PyResult<(f64, f64)> {
    let c = cx::near_critical_constants(&mu.inner).py_err()?;
    Ok((c.c_tot, c.c_min))
}

/// `(exponent_tot, prefactor_tot, exponent_min, prefactor_min)`.
#[pyfunction]
#[pyo3(signature = (mu, epsilons = None))]
fn near_critical_fit(mu: &PyMeasure, epsilons: Option<Vec<f64>>) -> PyResult<(f64, f64, f64, f64)> {
    let eps = epsilons.unwrap_or_else(|| cx::DEFAULT_EPSILONS.to_vec());
    let f = cx::near_critical_fit(&mu.inner, &eps).py_err()?;
    Ok((f.exponent_tot, f.prefactor_tot, f.exponent_min, f.prefactor_min))
}

#[pyfunction]
fn solve_mde(lattice: &PyLattice, j: f64, u: Vec<f64>, z: Complex64) -> PyResult<Vec<Complex64>> {
    let model = MdeModel::new(lattice.inner, j).py_err()?;
    mde::solve_mde(&model, &u, z).py_err()
}

/// `(x, rho)` of the deterministic block-model density at `u`.
#[pyfunction]
fn mu_infinity(lattice: &PyLattice, j: f64, u: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let model = MdeModel::new(lattice.inner, j).py_err()?;
    let d = mde::mu_infinity(&model, &u, None).py_err()?;
    Ok((d.nodes().collect(), d.values().to_vec()))
}

#[pyfunction]
fn surface_value(lattice: &PyLattice, j: f64, u: Vec<f64>) -> PyResult<f64> {
    let model = MdeModel::new(lattice.inner, j).py_err()?;
    mde::surface_value(&model, &u).py_err()
}

/// Sorted eigenvalues of one sampled block matrix.
#[pyfunction]
#[pyo3(signature = (lattice, j, u, n, seed = 0))]
fn sample_block_spectrum(lattice: &PyLattice, j: f64, u: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let model = MdeModel::new(lattice.inner, j).py_err()?;
    let cfg = SamplerConfig::new(n, 1, seed).py_err()?;
    mc::sampling::sample_block_eigenvalues(&model, &u, &cfg, 0).py_err()
}

/// Strict interior minima of `V + <x, D x> / 2` with `B(r) = exp(-rate r)`.
#[pyfunction]
#[pyo3(signature = (rate, d, half_width = 1.0, grid_n = 41, seed = 0))]
fn landscape_minima_count(rate: f64, d: [[f64; 2]; 2], half_width: f64, grid_n: usize, seed: u64) -> PyResult<usize> {
    let b = CorrelatorSpec::exponential(rate).py_err()?;
    Ok(mc::landscape_minima_count(&b, &d, half_width, grid_n, seed).py_err()?.count)
}

#[pyfunction]
fn wasserstein1(a: &PyMeasure, b: &PyMeasure) -> f64 {
    measures::wasserstein1(&a.inner, &b.inner)
}

#[pymodule]
fn atlas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyFreeConvolution>()?;
    m.add_class::<PyComplexity>()?;
    m.add_function(wrap_pyfunction!(t_critical, m)?)?;
    m.add_function(wrap_pyfunction!(larkin_mass, m)?)?;
    m.add_function(wrap_pyfunction!(b_critical, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(elastic_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(near_critical_constants, m)?)?;
    m.add_function(wrap_pyfunction!(near_critical_fit, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mde, m)?)?;
    m.add_function(wrap_pyfunction!(mu_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(surface_value, m)?)?;
    m.add_function(wrap_pyfunction!(sample_block_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(landscape_minima_count, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    Ok(())
}
