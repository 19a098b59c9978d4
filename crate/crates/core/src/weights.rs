//! Laplacian stencil weights: collocation, weighted least squares over
//! monomials, and RBF-FD with polyharmonic splines plus monomial augmentation.
//!
//! The engine functions take stencil coordinates as a flat slice (`dim`
//! values per node, `dim = center.len()`) and work relative to the center.
//! [`laplacian_weights`] additionally rescales the stencil to unit radius
//! before assembly and maps the weights back, which is what the global
//! pipeline uses.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{monomial_count, phs_eval, phs_laplacian, MonomialBasis, PhsSpec};
use crate::geometry::{norm, NeighborIndex, NodeSet};
use crate::linalg::{inverse_norm1_estimate, norm1};
use crate::{Error, Result};

/// Condition estimates above this are reported but do not fail the solve.
pub const COND_WARN: f64 = 1e10;

/// Local systems whose condition estimate exceeds 1/ε are treated as singular.
const COND_SINGULAR: f64 = 1.0 / f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Collocation,
    Wls,
    RbfFd,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Collocation => "collocation",
            Engine::Wls => "wls",
            Engine::RbfFd => "rbffd",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "collocation" => Ok(Engine::Collocation),
            "wls" => Ok(Engine::Wls),
            "rbffd" => Ok(Engine::RbfFd),
            _ => Err(Error::Config(format!(
                "unknown engine `{s}` (expected wls, rbffd or collocation)"
            ))),
        }
    }
}

/// Width of the default Gaussian row weight, relative to the stencil radius.
pub const DEFAULT_WLS_SIGMA: f64 = 0.6;

/// Row weighting θ of the least-squares fit.
///
/// The default is Gaussian with σ = [`DEFAULT_WLS_SIGMA`]. Unweighted
/// least squares over the oversized stencil yields global Poisson matrices
/// with near-null modes at m = 2, so solutions blow up erratically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WlsWeight {
    Uniform,
    /// θᵢ = exp(−(rᵢ / (σ·r_max))²)
    Gaussian {
        sigma: f64,
    },
}

impl Default for WlsWeight {
    fn default() -> Self {
        WlsWeight::Gaussian {
            sigma: DEFAULT_WLS_SIGMA,
        }
    }
}

impl WlsWeight {
    fn theta(self, r: f64, r_max: f64) -> f64 {
        match self {
            WlsWeight::Uniform => 1.0,
            WlsWeight::Gaussian { sigma } => (-(r / (sigma * r_max)).powi(2)).exp(),
        }
    }
}

/// Which engine builds the weights, with its degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub engine: Engine,
    /// Monomial degree (augmentation degree for RBF-FD).
    pub m: usize,
    /// PHS exponent, RBF-FD only.
    pub k: u32,
    /// WLS only.
    pub wls_weight: WlsWeight,
}

impl BasisSpec {
    pub fn collocation(m: usize) -> Self {
        Self {
            engine: Engine::Collocation,
            m,
            k: 3,
            wls_weight: WlsWeight::default(),
        }
    }

    pub fn wls(m: usize) -> Self {
        Self {
            engine: Engine::Wls,
            ..Self::collocation(m)
        }
    }

    pub fn rbffd(m: usize, k: u32) -> Self {
        Self {
            engine: Engine::RbfFd,
            k,
            ..Self::collocation(m)
        }
    }

    /// Number of monomials s in `dim` dimensions.
    pub fn basis_size(&self, dim: usize) -> usize {
        monomial_count(self.m, dim)
    }
}

/// Weights of one engine solve, in the coordinates it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights {
    pub w: Vec<f64>,
    pub cond_estimate: f64,
}

/// Laplacian weights attached to an interior node of a [`NodeSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct StencilWeights {
    pub center: usize,
    pub neighbor_indices: Vec<usize>,
    /// Units of 1/length².
    pub w: Vec<f64>,
    pub cond_estimate: f64,
}

impl StencilWeights {
    /// Applies the weights to nodal values.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.neighbor_indices
            .iter()
            .zip(&self.w)
            .map(|(&j, w)| w * values[j])
            .sum()
    }
}

/// Stencil coordinates shifted to the center and divided by the stencil radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledStencil {
    pub coords: Vec<f64>,
    /// ρ = largest distance from the center.
    pub scale: f64,
}

pub fn local_scale(points: &[f64], center: &[f64]) -> Result<ScaledStencil> {
    let mut coords = shift(points, center);
    let scale = coords.chunks_exact(center.len()).map(norm).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateStencil);
    }
    coords.iter_mut().for_each(|c| *c /= scale);
    Ok(ScaledStencil { coords, scale })
}

fn shift(points: &[f64], center: &[f64]) -> Vec<f64> {
    let dim = center.len();
    points.iter().enumerate().map(|(i, x)| x - center[i % dim]).collect()
}

/// P with P[(i, j)] = p_j(x_i), one row per stencil node.
fn monomial_matrix(rel: &[f64], basis: &MonomialBasis) -> DMatrix<f64> {
    let dim = basis.dim();
    let n = rel.len() / dim;
    let mut p = DMatrix::zeros(n, basis.len());
    let mut row = vec![0.0; basis.len()];
    for (i, x) in rel.chunks_exact(dim).enumerate() {
        basis.eval_into(x, &mut row);
        for (j, v) in row.iter().enumerate() {
            p[(i, j)] = *v;
        }
    }
    p
}

fn check_dims(points: &[f64], center: &[f64], basis: &MonomialBasis) -> Result<usize> {
    let dim = center.len();
    if dim == 0 || !points.len().is_multiple_of(dim) || basis.dim() != dim {
        return Err(Error::InvalidBasis(format!(
            "{} coordinates, {dim}D center, {}D basis",
            points.len(),
            basis.dim()
        )));
    }
    Ok(points.len() / dim)
}

fn checked(w: Vec<f64>, cond: f64) -> Result<LocalWeights> {
    if cond.is_nan() || cond > COND_SINGULAR || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { cond });
    }
    Ok(LocalWeights { w, cond_estimate: cond })
}

/// Square case n = s: solves P·w = ℓ with ℓ_j = ∇²p_j at the center.
pub fn collocation_weights(points: &[f64], center: &[f64], basis: &MonomialBasis) -> Result<LocalWeights> {
    let n = check_dims(points, center, basis)?;
    if n != basis.len() {
        return Err(Error::StencilBasisMismatch {
            n,
            s: basis.len(),
            detail: "collocation needs exactly as many nodes as basis functions",
        });
    }
    let rel = shift(points, center);
    // Rows are basis functions, columns stencil nodes.
    let pt = monomial_matrix(&rel, basis).transpose();
    let rhs = DVector::from_vec(basis.laplacian(&vec![0.0; center.len()]));
    let lu = pt.clone().lu();
    let lut = pt.transpose().lu();
    let Some(w) = lu.solve(&rhs) else {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    };
    let cond = norm1(&pt)
        * inverse_norm1_estimate(
            n,
            |x| {
                lu.solve_mut(x);
            },
            |x| {
                lut.solve_mut(x);
            },
        );
    checked(w.as_slice().to_vec(), cond)
}

/// Weighted least squares over monomials, n ≥ s.
///
/// With B = Θ·P and its thin QR factorization B = Q·R, the weights are
/// w = Θ·Q·R⁻ᵀ·ℓ: the minimum Θ⁻¹-weighted-norm solution of Pᵀw = ℓ, which
/// equals applying ℓ to the coefficients of the weighted fit.
pub fn wls_weights(points: &[f64], center: &[f64], basis: &MonomialBasis, weight: WlsWeight) -> Result<LocalWeights> {
    let n = check_dims(points, center, basis)?;
    let s = basis.len();
    if n < s {
        return Err(Error::StencilBasisMismatch {
            n,
            s,
            detail: "least squares needs at least as many nodes as basis functions",
        });
    }
    let dim = center.len();
    let rel = shift(points, center);
    let radii: Vec<f64> = rel.chunks_exact(dim).map(norm).collect();
    let r_max = radii.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let theta: Vec<f64> = radii.iter().map(|&r| weight.theta(r, r_max)).collect();

    let mut b = monomial_matrix(&rel, basis);
    for (i, t) in theta.iter().enumerate() {
        b.row_mut(i).scale_mut(*t);
    }
    let qr = b.qr();
    let (q, r) = (qr.q(), qr.r());
    if r.diagonal().iter().any(|v| *v == 0.0) {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    }
    let rhs = DVector::from_vec(basis.laplacian(&vec![0.0; dim]));
    let Some(y) = r.tr_solve_upper_triangular(&rhs) else {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    };
    let cond = norm1(&r)
        * inverse_norm1_estimate(
            s,
            |x| {
                r.solve_upper_triangular_mut(x);
            },
            |x| {
                r.tr_solve_upper_triangular_mut(x);
            },
        );
    let qy = q * y;
    let w = qy.iter().zip(&theta).map(|(v, t)| v * t).collect();
    checked(w, cond)
}

/// The symmetric saddle matrix [[Φ, P], [Pᵀ, 0]] with Φᵢⱼ = φ(‖xᵢ − xⱼ‖).
pub fn saddle_matrix(rel: &[f64], phs: PhsSpec, basis: &MonomialBasis) -> DMatrix<f64> {
    let dim = basis.dim();
    let n = rel.len() / dim;
    let s = basis.len();
    let p = monomial_matrix(rel, basis);
    let mut a = DMatrix::zeros(n + s, n + s);
    for i in 0..n {
        let xi = &rel[i * dim..(i + 1) * dim];
        a[(i, i)] = phs_eval(0.0, phs);
        for j in (i + 1)..n {
            let xj = &rel[j * dim..(j + 1) * dim];
            let r = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let v = phs_eval(r, phs);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        for j in 0..s {
            a[(i, n + j)] = p[(i, j)];
            a[(n + j, i)] = p[(i, j)];
        }
    }
    a
}

/// RBF-FD weights: PHS interpolation augmented with all monomials of degree
/// ≤ m, solved as the (n+s) saddle-point system. Lagrange multipliers are
/// dropped.
pub fn rbffd_weights(points: &[f64], center: &[f64], phs: PhsSpec, m: usize) -> Result<LocalWeights> {
    let dim = center.len();
    let basis = MonomialBasis::new(dim, m);
    let n = check_dims(points, center, &basis)?;
    let s = basis.len();
    if n < s {
        return Err(Error::StencilBasisMismatch {
            n,
            s,
            detail: "the monomial constraints need at least as many nodes as basis functions",
        });
    }
    let rel = shift(points, center);
    let a = saddle_matrix(&rel, phs, &basis);
    let mut rhs = DVector::zeros(n + s);
    for (i, x) in rel.chunks_exact(dim).enumerate() {
        rhs[i] = phs_laplacian(norm(x), phs, dim)?;
    }
    for (j, v) in basis.laplacian(&vec![0.0; dim]).into_iter().enumerate() {
        rhs[n + j] = v;
    }
    let lu = a.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    }
    let Some(sol) = lu.solve(&rhs) else {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    };
    // Symmetric matrix: the transpose solve is the same solve.
    let solve = |x: &mut DVector<f64>| {
        lu.solve_mut(x);
    };
    let cond = norm1(&a) * inverse_norm1_estimate(n + s, solve, solve);
    checked(sol.as_slice()[..n].to_vec(), cond)
}

/// Engine dispatch in scaled local coordinates; returned weights are in the
/// units of the input coordinates.
pub fn laplacian_weights(points: &[f64], center: &[f64], spec: &BasisSpec) -> Result<LocalWeights> {
    let dim = center.len();
    let (coords, scale) = match local_scale(points, center) {
        Ok(sc) => (sc.coords, sc.scale),
        // A lone center has no length scale; the weights do not depend on one.
        Err(Error::DegenerateStencil) if points.len() == dim => (vec![0.0; dim], 1.0),
        Err(e) => return Err(e),
    };
    let origin = vec![0.0; dim];
    let mut local = match spec.engine {
        Engine::Collocation => collocation_weights(&coords, &origin, &MonomialBasis::new(dim, spec.m))?,
        Engine::Wls => wls_weights(&coords, &origin, &MonomialBasis::new(dim, spec.m), spec.wls_weight)?,
        Engine::RbfFd => rbffd_weights(&coords, &origin, PhsSpec::new(spec.k)?, spec.m)?,
    };
    let inv2 = 1.0 / (scale * scale);
    local.w.iter_mut().for_each(|w| *w *= inv2);
    Ok(local)
}

/// Stencil size requirements of an engine, checked once before a batch.
pub fn check_stencil_size(spec: &BasisSpec, dim: usize, n: usize, count: usize) -> Result<()> {
    if n == 0 || n > count {
        return Err(Error::InvalidStencilSize { n, count });
    }
    let s = spec.basis_size(dim);
    match spec.engine {
        Engine::Collocation if n != s => Err(Error::StencilBasisMismatch {
            n,
            s,
            detail: "collocation needs exactly as many nodes as basis functions",
        }),
        Engine::Wls | Engine::RbfFd if n < s => Err(Error::StencilBasisMismatch {
            n,
            s,
            detail: "stencil smaller than the monomial basis",
        }),
        _ => Ok(()),
    }
}

/// Weights for one node of a set.
pub fn node_weights(
    nodes: &NodeSet,
    index: &NeighborIndex,
    spec: &BasisSpec,
    center: usize,
    n: usize,
) -> Result<StencilWeights> {
    let stencil = index.knn(center, n)?;
    let points: Vec<f64> = stencil
        .neighbors
        .iter()
        .flat_map(|&j| nodes.point(j).iter().copied())
        .collect();
    let local = laplacian_weights(&points, nodes.point(center), spec)?;
    Ok(StencilWeights {
        center,
        neighbor_indices: stencil.neighbors,
        w: local.w,
        cond_estimate: local.cond_estimate,
    })
}

/// Weights for every interior node, ordered by node index. Boundary nodes
/// carry Dirichlet rows and get none. Nodes are processed in parallel.
pub fn compute_all_weights(
    nodes: &NodeSet,
    index: &NeighborIndex,
    spec: &BasisSpec,
    n: usize,
) -> Result<Vec<StencilWeights>> {
    check_stencil_size(spec, nodes.dim(), n, nodes.len())?;
    let interior: Vec<usize> = nodes.interior().collect();
    interior
        .par_iter()
        .map(|&c| node_weights(nodes, index, spec, c, n).map_err(|e| Error::at_node(c, e)))
        .collect()
}

/// Largest relative monomial-reproduction error of Laplacian weights.
///
/// Every monomial of degree ≤ m in the centered, radius-scaled frame is
/// sampled at the stencil nodes and contracted with the (rescaled) weights;
/// the result is compared to its exact Laplacian at the center as
/// |Σ wᵢ p(xᵢ) − ∇²p(x_c)| / (1 + |∇²p(x_c)|).
pub fn monomial_exactness(points: &[f64], center: &[f64], w: &[f64], m: usize) -> Result<f64> {
    let dim = center.len();
    let (coords, scale) = match local_scale(points, center) {
        Ok(sc) => (sc.coords, sc.scale),
        Err(Error::DegenerateStencil) if points.len() == dim => (vec![0.0; dim], 1.0),
        Err(e) => return Err(e),
    };
    let basis = MonomialBasis::new(dim, m);
    let exact = basis.laplacian(&vec![0.0; dim]);
    let mut acc = vec![0.0; basis.len()];
    let mut row = vec![0.0; basis.len()];
    for (x, wi) in coords.chunks_exact(dim).zip(w) {
        basis.eval_into(x, &mut row);
        let ws = wi * scale * scale;
        for (a, p) in acc.iter_mut().zip(&row) {
            *a += ws * p;
        }
    }
    Ok(acc
        .iter()
        .zip(&exact)
        .map(|(a, e)| (a - e).abs() / (1.0 + e.abs()))
        .fold(0.0, f64::max))
}
