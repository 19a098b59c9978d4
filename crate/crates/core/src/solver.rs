//! Global Dirichlet Poisson system on a node set.
//!
//! Interior rows carry the Laplacian stencil weights with right-hand side
//! f(x) = −d·π²·Π sin(πxᵢ); boundary rows are identity rows carrying the exact
//! solution u(x) = Π sin(πxᵢ).

use std::f64::consts::PI;
use std::io::Write;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::geometry::{Kind, NodeSet};
use crate::weights::StencilWeights;
use crate::{Error, Result};

pub fn analytic_solution(x: &[f64]) -> f64 {
    x.iter().map(|xi| (PI * xi).sin()).product()
}

pub fn analytic_rhs(x: &[f64], d: usize) -> f64 {
    -(d as f64) * PI * PI * analytic_solution(x)
}

/// Square sparse matrix in compressed-row form plus a right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub b: Vec<f64>,
}

impl SparseSystem {
    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    /// ‖A·x − b‖∞ / ‖b‖∞ (plain ‖A·x − b‖∞ when b = 0).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let res = ax.iter().zip(&self.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let bn = self.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if bn > 0.0 {
            res / bn
        } else {
            res
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                row[j] += v;
            }
        }
        a
    }
}

/// Builds the Poisson system from one weight set per interior node.
pub fn assemble(nodes: &NodeSet, weights: &[StencilWeights]) -> Result<SparseSystem> {
    let n = nodes.len();
    let d = nodes.dim();
    let mut by_node: Vec<Option<&StencilWeights>> = vec![None; n];
    for sw in weights {
        if sw.center < n {
            by_node[sw.center] = Some(sw);
        }
    }
    let mut sys = SparseSystem {
        row_ptr: Vec::with_capacity(n + 1),
        col_idx: Vec::new(),
        values: Vec::new(),
        b: Vec::with_capacity(n),
    };
    sys.row_ptr.push(0);
    for i in 0..n {
        let x = nodes.point(i);
        match nodes.kind(i) {
            Kind::Boundary => {
                sys.col_idx.push(i);
                sys.values.push(1.0);
                sys.b.push(analytic_solution(x));
            }
            Kind::Interior => {
                let sw = by_node[i].ok_or(Error::MissingWeights(i))?;
                sys.col_idx.extend_from_slice(&sw.neighbor_indices);
                sys.values.extend_from_slice(&sw.w);
                sys.b.push(analytic_rhs(x, d));
            }
        }
        sys.row_ptr.push(sys.col_idx.len());
    }
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Sparse LU with fill-reducing ordering.
    Direct,
    /// BiCGSTAB preconditioned with ILU(0).
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Direct,
            tolerance: 1e-10,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u_hat: Vec<f64>,
    /// Krylov iterations; zero for the direct solver.
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_sparse(system: &SparseSystem, config: &SolverConfig) -> Result<Solution> {
    let u_hat = match config.kind {
        SolverKind::Direct => solve_direct(system)?,
        SolverKind::Iterative => {
            let (x, iterations) = bicgstab(system, config)?;
            let residual = system.relative_residual(&x);
            return Ok(Solution {
                u_hat: x,
                iterations,
                residual,
            });
        }
    };
    let residual = system.relative_residual(&u_hat);
    Ok(Solution {
        u_hat,
        iterations: 0,
        residual,
    })
}

fn solve_direct(system: &SparseSystem) -> Result<Vec<f64>> {
    let n = system.size();
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
        .flat_map(|i| {
            let (cols, vals) = system.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| Triplet::new(i, j, v))
        })
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let lu = a.as_ref().sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let b = Col::<f64>::from_fn(n, |i| system.b[i]);
    let x = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("singular matrix".into()));
    }
    Ok(x)
}

/// ILU(0) factors stored on the sparsity pattern of A, rows sorted by column.
struct Ilu0 {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &SparseSystem) -> Result<Self> {
        let n = a.size();
        let mut cols = Vec::with_capacity(a.col_idx.len());
        let mut vals = Vec::with_capacity(a.values.len());
        let mut row_ptr = vec![0];
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            let (c, v) = a.row(i);
            let mut entries: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
            entries.sort_by_key(|e| e.0);
            entries.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            for (j, x) in entries {
                if j == i {
                    diag[i] = cols.len();
                }
                cols.push(j);
                vals.push(x);
            }
            row_ptr.push(cols.len());
        }
        if diag.contains(&usize::MAX) {
            return Err(Error::Factorization(
                "ILU(0) needs a structurally nonzero diagonal".into(),
            ));
        }
        let mut lookup = vec![usize::MAX; n];
        for i in 0..n {
            let row = row_ptr[i]..row_ptr[i + 1];
            for p in row.clone() {
                lookup[cols[p]] = p;
            }
            for p in row.clone() {
                let k = cols[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Factorization("zero pivot in ILU(0)".into()));
                }
                vals[p] /= pivot;
                let lik = vals[p];
                for q in (diag[k] + 1)..row_ptr[k + 1] {
                    let t = lookup[cols[q]];
                    if t != usize::MAX {
                        vals[t] -= lik * vals[q];
                    }
                }
            }
            for p in row {
                lookup[cols[p]] = usize::MAX;
            }
        }
        Ok(Self {
            row_ptr,
            cols,
            vals,
            diag,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                s -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                s -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = s / self.vals[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Right-preconditioned BiCGSTAB, stopping on the relative ∞-norm residual.
fn bicgstab(a: &SparseSystem, config: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let n = a.size();
    let ilu = Ilu0::new(a)?;
    let b_norm = norm_inf(&a.b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = a.b.clone();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut s = vec![0.0; n];
    if norm_inf(&r) / b_norm <= config.tolerance {
        return Ok((x, 0));
    }
    for it in 1..=config.max_iterations {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.apply(&p, &mut phat);
        v = a.matvec(&phat);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm_inf(&s) / b_norm <= config.tolerance {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok((x, it));
        }
        ilu.apply(&s, &mut shat);
        let t = a.matvec(&shat);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if norm_inf(&r) / b_norm <= config.tolerance {
            return Ok((x, it));
        }
    }
    Err(Error::NotConverged {
        iterations: config.max_iterations,
        residual: a.relative_residual(&x),
    })
}

/// Relative max-norm error against the exact solution sampled at every node.
pub fn inf_norm_error(u_hat: &[f64], nodes: &NodeSet) -> Result<f64> {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (u, x) in u_hat.iter().zip(nodes.points()) {
        let exact = analytic_solution(x);
        err = err.max((u - exact).abs());
        scale = scale.max(exact.abs());
    }
    if scale == 0.0 {
        return Err(Error::ZeroSolution);
    }
    if u_hat.iter().any(|v| v.is_nan()) {
        return Ok(f64::NAN);
    }
    Ok(err / scale)
}

/// Writes `x0,...,x{d-1},u_hat,u_exact,abs_err` rows for every node.
pub fn write_solution_csv<W: Write>(out: W, nodes: &NodeSet, u_hat: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..nodes.dim()).map(|k| format!("x{k}")).collect();
    header.extend(["u_hat", "u_exact", "abs_err"].map(String::from));
    w.write_record(&header)?;
    for (x, u) in nodes.points().zip(u_hat) {
        let exact = analytic_solution(x);
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        row.extend([u, &exact, &(u - exact).abs()].map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
