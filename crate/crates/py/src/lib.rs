//! Python bindings: `import pim`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use pim_core::direct::eval_direct;
use pim_core::fft::RustFftProvider;
use pim_core::pgf::{pgf_total, TruncationPolicy};
use pim_core::solver::{build_plan, solve, Problem, SolverPlan};
use pim_core::study::{max_relative_error, CoaxSpec};
use pim_core::{NearGrid, ObserverPointSet, Periodicity, PimError, Regime, SourcePointSet, TargetBox, Vec3};

create_exception!(pim, SeriesError, PyArithmeticError, "PGF series failed: Wood anomaly or no convergence.");

fn to_py(e: PimError) -> PyErr {
    let msg = e.to_string();
    match e {
        PimError::WoodAnomaly { .. } | PimError::NotConverged { .. } | PimError::Tabulation { .. } | PimError::Domain(_) => {
            SeriesError::new_err(msg)
        }
        PimError::Io(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

/// Lattice, wavenumbers and regime of the array.
#[pyclass(name = "PeriodicityConfig", frozen)]
struct PyConfig(pim_core::PeriodicityConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (dim, lattice, k0 = Complex64::new(0.0, 0.0), kshift = [Complex64::new(0.0, 0.0); 3], regime = None))]
    fn new(dim: usize, lattice: Vec3, k0: Complex64, kshift: [Complex64; 3], regime: Option<&str>) -> PyResult<Self> {
        let dim = Periodicity::from_count(dim).ok_or_else(|| PyValueError::new_err("dim must be 1, 2 or 3"))?;
        Ok(Self(match regime {
            None => pim_core::PeriodicityConfig::inferred(dim, lattice, k0, kshift),
            Some(r) => pim_core::PeriodicityConfig::new(dim, lattice, k0, kshift, r.parse::<Regime>().map_err(to_py)?),
        }))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim.count()
    }

    #[getter]
    fn lattice(&self) -> Vec3 {
        self.0.lattice
    }

    #[getter]
    fn k0(&self) -> Complex64 {
        self.0.k0
    }

    #[getter]
    fn kshift(&self) -> [Complex64; 3] {
        self.0.kshift
    }

    #[getter]
    fn regime(&self) -> &'static str {
        self.0.regime.name()
    }

    fn __repr__(&self) -> String {
        format!(
            "PeriodicityConfig(dim={}, lattice={:?}, k0={}, regime='{}')",
            self.0.dim.count(),
            self.0.lattice,
            self.0.k0,
            self.0.regime.name()
        )
    }
}

/// Solver knobs; `near_grid=None` picks the grid from the point count.
#[pyclass(name = "SolverParams", frozen)]
struct PyParams(pim_core::SolverParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (i_d = 1, far_order = 3, far_grid = [10, 10, 10], near_order = 2, near_grid = None, series_tol = 1e-10, er_range_boxes = 1, neutrality_tol = 1e-12))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        i_d: usize,
        far_order: usize,
        far_grid: [usize; 3],
        near_order: usize,
        near_grid: Option<[usize; 3]>,
        series_tol: f64,
        er_range_boxes: usize,
        neutrality_tol: f64,
    ) -> Self {
        Self(pim_core::SolverParams {
            i_d,
            far_order,
            far_grid,
            near_order,
            near_grid: near_grid.map_or(NearGrid::Auto, NearGrid::Fixed),
            series_tol,
            er_range_boxes,
            neutrality_tol,
        })
    }

    #[getter]
    fn i_d(&self) -> usize {
        self.0.i_d
    }

    #[getter]
    fn far_order(&self) -> usize {
        self.0.far_order
    }

    #[getter]
    fn far_grid(&self) -> [usize; 3] {
        self.0.far_grid
    }

    #[getter]
    fn near_order(&self) -> usize {
        self.0.near_order
    }

    #[getter]
    fn near_grid(&self) -> Option<[usize; 3]> {
        match self.0.near_grid {
            NearGrid::Auto => None,
            NearGrid::Fixed(g) => Some(g),
        }
    }

    #[getter]
    fn series_tol(&self) -> f64 {
        self.0.series_tol
    }
}

/// A built plan for one geometry. Reusable for new source amplitudes.
#[pyclass(name = "Solver", frozen)]
struct PySolver {
    plan: SolverPlan,
    n_sources: usize,
}

#[pymethods]
impl PySolver {
    #[new]
    #[pyo3(signature = (cfg, extent, positions, amplitudes, observers = None, params = None))]
    fn new(
        py: Python<'_>,
        cfg: &PyConfig,
        extent: Vec3,
        positions: Vec<Vec3>,
        amplitudes: Vec<Complex64>,
        observers: Option<Vec<Vec3>>,
        params: Option<&PyParams>,
    ) -> PyResult<Self> {
        let observers = ObserverPointSet::new(observers.unwrap_or_else(|| positions.clone()));
        let sources = SourcePointSet::new(positions, amplitudes).map_err(to_py)?;
        let problem = Problem {
            cfg: cfg.0,
            target: TargetBox::new(extent),
            sources,
            observers,
            params: params.map_or_else(Default::default, |p| p.0),
        };
        let n_sources = problem.sources.len();
        let plan = py.detach(|| build_plan(&problem, &RustFftProvider::new())).map_err(to_py)?;
        Ok(Self { plan, n_sources })
    }

    /// Potentials at the observers for the given (or original) amplitudes.
    fn solve(&self, py: Python<'_>, amplitudes: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        if amplitudes.len() != self.n_sources {
            return Err(PyValueError::new_err(format!(
                "expected {} amplitudes, got {}",
                self.n_sources,
                amplitudes.len()
            )));
        }
        py.detach(|| solve(&self.plan, &amplitudes, &RustFftProvider::new()))
            .map(|f| f.values)
            .map_err(to_py)
    }

    #[getter]
    fn build_seconds(&self) -> f64 {
        self.plan.build_time.as_secs_f64()
    }

    #[getter]
    fn near_grid(&self) -> [usize; 3] {
        self.plan.near.grid.dims
    }

    #[getter]
    fn series_terms(&self) -> usize {
        self.plan.series_terms()
    }
}

/// Periodic Green's function G^p(r), converged to `tol`.
#[pyfunction]
#[pyo3(signature = (r, cfg, tol = 1e-12))]
fn pgf(r: Vec3, cfg: &PyConfig, tol: f64) -> PyResult<Complex64> {
    pgf_total(r, &cfg.0, &TruncationPolicy::with_tol(tol))
        .and_then(|s| s.into_value())
        .map_err(to_py)
}

/// Brute-force periodic sum over every observer-source pair.
#[pyfunction]
#[pyo3(signature = (cfg, positions, amplitudes, observers, tol = 1e-12))]
fn direct(
    py: Python<'_>,
    cfg: &PyConfig,
    positions: Vec<Vec3>,
    amplitudes: Vec<Complex64>,
    observers: Vec<Vec3>,
    tol: f64,
) -> PyResult<Vec<Complex64>> {
    let src = SourcePointSet::new(positions, amplitudes).map_err(to_py)?;
    let obs = ObserverPointSet::new(observers);
    py.detach(|| eval_direct(&cfg.0, &src, &obs, &TruncationPolicy::with_tol(tol)).into_values())
        .map_err(to_py)
}

/// Two charged coaxial shells: returns (positions, amplitudes, extent, axis points).
#[pyfunction]
#[pyo3(signature = (inner_angular = 200, outer_angular = 400, axial = 50, axis_count = 21))]
#[allow(clippy::type_complexity)]
fn coax(inner_angular: usize, outer_angular: usize, axial: usize, axis_count: usize) -> (Vec<Vec3>, Vec<Complex64>, Vec3, Vec<Vec3>) {
    let spec = CoaxSpec {
        inner_angular,
        outer_angular,
        axial,
        ..CoaxSpec::default()
    };
    let src = spec.sources();
    (
        src.positions().to_vec(),
        src.amplitudes().to_vec(),
        spec.target_box().extent,
        spec.axis_observers(axis_count).positions().to_vec(),
    )
}

/// max |u - ref| / max |ref|.
#[pyfunction]
fn relative_error(u: Vec<Complex64>, reference: Vec<Complex64>) -> PyResult<f64> {
    if u.len() != reference.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(max_relative_error(&u, &reference))
}

#[pymodule]
fn pim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PySolver>()?;
    m.add_function(wrap_pyfunction!(pgf, m)?)?;
    m.add_function(wrap_pyfunction!(direct, m)?)?;
    m.add_function(wrap_pyfunction!(coax, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add("SeriesError", m.py().get_type::<SeriesError>())?;
    Ok(())
}
