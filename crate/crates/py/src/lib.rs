//! Python bindings: node generation, kNN stencils, the weight engines, single
//! benchmark runs and the spread statistics.

use meshfree_core::basis::{self, PhsSpec};
use meshfree_core::benchmark::{self, run_seed, RunSpec, StencilSize};
use meshfree_core::solver::{self, SolverConfig};
use meshfree_core::weights::{self, DEFAULT_WLS_SIGMA};
use meshfree_core::{BasisSpec, Engine, Kind, NeighborIndex, WlsWeight};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(meshfree, MeshfreeError, PyException);

fn err(e: meshfree_core::Error) -> PyErr {
    MeshfreeError::new_err(e.to_string())
}

fn engine(name: &str) -> PyResult<Engine> {
    name.parse().map_err(err)
}

fn spec(engine_name: &str, m: usize, k: u32, wls_sigma: Option<f64>) -> PyResult<BasisSpec> {
    Ok(BasisSpec {
        engine: engine(engine_name)?,
        m,
        k,
        wls_weight: match wls_sigma {
            Some(s) if s <= 0.0 => WlsWeight::Uniform,
            Some(sigma) => WlsWeight::Gaussian { sigma },
            None => WlsWeight::default(),
        },
    })
}

/// (center, neighbor indices, weights, condition estimate)
type WeightRow = (usize, Vec<usize>, Vec<f64>, f64);

/// Scattered nodes in the unit ball with interior/boundary tags.
#[pyclass(module = "meshfree", frozen)]
struct NodeSet {
    inner: meshfree_core::NodeSet,
    index: NeighborIndex,
}

#[pymethods]
impl NodeSet {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "NodeSet(dim={}, N={}, h={:.4})",
            self.inner.dim(),
            self.inner.len(),
            self.inner.h()
        )
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(<[f64]>::to_vec).collect()
    }

    /// 'i' for interior, 'b' for boundary.
    fn kinds(&self) -> String {
        self.inner.kinds().iter().map(|k| k.tag()).collect()
    }

    fn interior(&self) -> Vec<usize> {
        self.inner.interior().collect()
    }

    fn boundary(&self) -> Vec<usize> {
        self.inner.boundary().collect()
    }

    fn min_separation(&self) -> f64 {
        self.inner.min_separation()
    }

    /// Indices of the n nearest nodes to `center`, center first.
    fn knn(&self, center: usize, n: usize) -> PyResult<Vec<usize>> {
        Ok(self.index.knn(center, n).map_err(err)?.neighbors)
    }

    /// Laplacian weights of every interior node: list of (center, neighbors, w, cond).
    #[pyo3(signature = (engine, m, n=None, k=3, wls_sigma=None))]
    fn weights(
        &self,
        engine: &str,
        m: usize,
        n: Option<usize>,
        k: u32,
        wls_sigma: Option<f64>,
    ) -> PyResult<Vec<WeightRow>> {
        let spec = spec(engine, m, k, wls_sigma)?;
        let n = n.unwrap_or_else(|| benchmark::recommended_stencil(m, self.inner.dim()));
        let all = weights::compute_all_weights(&self.inner, &self.index, &spec, n).map_err(err)?;
        Ok(all
            .into_iter()
            .map(|w| (w.center, w.neighbor_indices, w.w, w.cond_estimate))
            .collect())
    }

    fn is_boundary(&self, i: usize) -> PyResult<bool> {
        if i >= self.inner.len() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.kind(i) == Kind::Boundary)
    }
}

#[pyfunction]
fn discretize_ball(d: usize, target_n: usize, seed: u64) -> PyResult<NodeSet> {
    let inner = meshfree_core::discretize_ball(d, target_n, seed).map_err(err)?;
    let index = NeighborIndex::build(&inner);
    Ok(NodeSet { inner, index })
}

#[pyfunction]
fn monomial_count(m: usize, d: usize) -> usize {
    basis::monomial_count(m, d)
}

#[pyfunction]
fn recommended_stencil(m: usize, d: usize) -> usize {
    benchmark::recommended_stencil(m, d)
}

#[pyfunction]
#[pyo3(signature = (r, k=3))]
fn phs_eval(r: f64, k: u32) -> PyResult<f64> {
    Ok(basis::phs_eval(r, PhsSpec::new(k).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (r, d, k=3))]
fn phs_laplacian(r: f64, d: usize, k: u32) -> PyResult<f64> {
    basis::phs_laplacian(r, PhsSpec::new(k).map_err(err)?, d).map_err(err)
}

#[pyfunction]
fn analytic_solution(x: Vec<f64>) -> f64 {
    solver::analytic_solution(&x)
}

/// Laplacian weights of one stencil; returns (w, cond_estimate).
#[pyfunction]
#[pyo3(signature = (points, center, engine, m, k=3, wls_sigma=None))]
fn laplacian_weights(
    points: Vec<Vec<f64>>,
    center: Vec<f64>,
    engine: &str,
    m: usize,
    k: u32,
    wls_sigma: Option<f64>,
) -> PyResult<(Vec<f64>, f64)> {
    if points.iter().any(|p| p.len() != center.len()) {
        return Err(MeshfreeError::new_err("points and center differ in dimension"));
    }
    let flat: Vec<f64> = points.concat();
    let lw = weights::laplacian_weights(&flat, &center, &spec(engine, m, k, wls_sigma)?).map_err(err)?;
    Ok((lw.w, lw.cond_estimate))
}

/// Discretize, solve and measure e_inf. The seed defaults to run `run` of
/// the benchmark seed sequence for `base_seed`.
#[pyfunction]
#[pyo3(signature = (d, engine, m, target_n, n=None, k=3, seed=None, base_seed=0, run=0))]
#[allow(clippy::too_many_arguments)]
fn run_single<'py>(
    py: Python<'py>,
    d: usize,
    engine: &str,
    m: usize,
    target_n: usize,
    n: Option<usize>,
    k: u32,
    seed: Option<u64>,
    base_seed: u64,
    run: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = n.map_or(StencilSize::Auto, StencilSize::Fixed).resolve(m, d);
    let spec = RunSpec {
        d,
        basis: spec(engine, m, k, None)?,
        n_target: target_n,
        n,
        seed: seed.unwrap_or_else(|| run_seed(base_seed, d, target_n, run)),
        solver: SolverConfig::default(),
    };
    let r = benchmark::run_single(&spec, run).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("d", r.d)?;
    out.set_item("engine", r.engine.name())?;
    out.set_item("m", r.m)?;
    out.set_item("k", r.k)?;
    out.set_item("N_target", r.n_target)?;
    out.set_item("N_actual", r.n_actual)?;
    out.set_item("n", r.n)?;
    out.set_item("run", r.run)?;
    out.set_item("seed", r.seed)?;
    out.set_item("e_inf", r.e_inf)?;
    out.set_item("t_weights_s", r.t_weights_s)?;
    out.set_item("t_solve_s", r.t_solve_s)?;
    out.set_item("max_cond", r.max_cond)?;
    Ok(out)
}

/// Min, median, max and (e_max − e_min)/e_median of the finite errors.
#[pyfunction]
fn stability_stats<'py>(py: Python<'py>, errors: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = benchmark::stability_stats(&errors).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("e_min", s.e_min)?;
    out.set_item("e_median", s.e_median)?;
    out.set_item("e_max", s.e_max)?;
    out.set_item("spread", s.spread)?;
    out.set_item("runs_finite", s.runs_finite)?;
    out.set_item("runs_sentinel", s.runs_sentinel)?;
    Ok(out)
}

#[pymodule]
fn meshfree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MeshfreeError", m.py().get_type::<MeshfreeError>())?;
    m.add("DEFAULT_WLS_SIGMA", DEFAULT_WLS_SIGMA)?;
    m.add_class::<NodeSet>()?;
    m.add_function(wrap_pyfunction!(discretize_ball, m)?)?;
    m.add_function(wrap_pyfunction!(monomial_count, m)?)?;
    m.add_function(wrap_pyfunction!(recommended_stencil, m)?)?;
    m.add_function(wrap_pyfunction!(phs_eval, m)?)?;
    m.add_function(wrap_pyfunction!(phs_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_solution, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian_weights, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(stability_stats, m)?)?;
    Ok(())
}
