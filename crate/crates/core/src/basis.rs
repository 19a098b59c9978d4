//! Monomial and polyharmonic-spline basis functions with their Laplacians.

use crate::{Error, Result};

/// Number of monomials of total degree ≤ `m` in `d` variables, C(m+d, d).
pub fn monomial_count(m: usize, d: usize) -> usize {
    // Multiplicative form stays exact: each partial product is a binomial.
    (1..=d).fold(1usize, |acc, i| acc * (m + i) / i)
}

/// Monomials x^α with |α| ≤ degree, in graded lexicographic order.
///
/// Within one total degree, exponent tuples are sorted descending, so in 2D
/// the degree-2 basis reads `1, x, y, x², xy, y²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    dim: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    /// Full basis of total degree ≤ `degree`.
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(monomial_count(degree, dim));
        for total in 0..=degree as u32 {
            let mut alpha = vec![0u32; dim];
            push_degree(&mut exponents, &mut alpha, 0, total);
        }
        Self { dim, degree, exponents }
    }

    /// Arbitrary monomial list, e.g. `{1, x, y, x², y²}` for the five-point
    /// collocation stencil.
    pub fn from_exponents(dim: usize, exponents: Vec<Vec<u32>>) -> Result<Self> {
        if exponents.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidBasis(format!(
                "exponent tuple of wrong length for {dim}D"
            )));
        }
        let degree = exponents
            .iter()
            .map(|a| a.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0);
        Ok(Self { dim, degree, exponents })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Powers x_k^0 ..= x_k^degree for every coordinate, row-major by axis.
    fn powers(&self, point: &[f64]) -> Vec<f64> {
        let stride = self.degree + 1;
        let mut pw = vec![1.0; self.dim * stride];
        for (k, &x) in point.iter().enumerate() {
            for e in 1..stride {
                pw[k * stride + e] = pw[k * stride + e - 1] * x;
            }
        }
        pw
    }

    /// Values of every basis monomial at `point`.
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(point, &mut out);
        out
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        debug_assert_eq!(point.len(), self.dim);
        let stride = self.degree + 1;
        let pw = self.powers(point);
        for (o, alpha) in out.iter_mut().zip(&self.exponents) {
            *o = alpha
                .iter()
                .enumerate()
                .map(|(k, &a)| pw[k * stride + a as usize])
                .product();
        }
    }

    /// ∇² of every basis monomial at `point`, from the closed form
    /// Σ_k α_k(α_k − 1) x_k^(α_k − 2) Π_{j≠k} x_j^α_j.
    pub fn laplacian(&self, point: &[f64]) -> Vec<f64> {
        debug_assert_eq!(point.len(), self.dim);
        let stride = self.degree + 1;
        let pw = self.powers(point);
        self.exponents
            .iter()
            .map(|alpha| {
                (0..self.dim)
                    .filter(|&k| alpha[k] >= 2)
                    .map(|k| {
                        let a = alpha[k] as usize;
                        let rest: f64 = (0..self.dim)
                            .filter(|&j| j != k)
                            .map(|j| pw[j * stride + alpha[j] as usize])
                            .product();
                        (a * (a - 1)) as f64 * pw[k * stride + a - 2] * rest
                    })
                    .sum()
            })
            .collect()
    }
}

fn push_degree(out: &mut Vec<Vec<u32>>, alpha: &mut [u32], axis: usize, remaining: u32) {
    if axis + 1 == alpha.len() {
        alpha[axis] = remaining;
        out.push(alpha.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        alpha[axis] = e;
        push_degree(out, alpha, axis + 1, remaining - e);
    }
    alpha[axis] = 0;
}

/// Polyharmonic spline φ(r) = r^k (odd k) or r^k·log r (even k).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhsSpec {
    k: u32,
}

impl Default for PhsSpec {
    fn default() -> Self {
        Self { k: 3 }
    }
}

impl PhsSpec {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPhsExponent);
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn eval(&self, r: f64) -> f64 {
        phs_eval(r, *self)
    }
}

pub fn phs_eval(r: f64, spec: PhsSpec) -> f64 {
    let k = spec.k as i32;
    if r == 0.0 {
        0.0
    } else if k % 2 == 1 {
        r.powi(k)
    } else {
        r.powi(k) * r.ln()
    }
}

/// ∇² of φ(‖x‖) in `d` dimensions, as a function of r = ‖x‖.
///
/// Odd k: k(k+d−2)·r^(k−2). Even k: r^(k−2)·[k(k+d−2)·log r + 2k+d−2].
/// Both vanish at r = 0 for k ≥ 3; smaller k are singular there.
pub fn phs_laplacian(r: f64, spec: PhsSpec, d: usize) -> Result<f64> {
    let k = spec.k as i32;
    let kd = (k * (k + d as i32 - 2)) as f64;
    if r == 0.0 {
        return if k >= 3 {
            Ok(0.0)
        } else {
            Err(Error::SingularPhs { k: spec.k })
        };
    }
    Ok(if k % 2 == 1 {
        kd * r.powi(k - 2)
    } else {
        r.powi(k - 2) * (kd * r.ln() + (2 * k + d as i32 - 2) as f64)
    })
}
