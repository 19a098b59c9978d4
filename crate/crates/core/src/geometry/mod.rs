//! Scattered node sets on the unit ball and exact nearest-neighbor stencils.

mod fill;
mod io;
mod knn;

pub use fill::{discretize_ball, spacing_for_target, MIN_TARGET_NODES};
pub use knn::{NeighborIndex, Stencil};

use crate::{Error, Result};

/// Role of a node in the Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Interior,
    Boundary,
}

impl Kind {
    pub fn tag(self) -> char {
        match self {
            Kind::Interior => 'i',
            Kind::Boundary => 'b',
        }
    }
}

/// Discretization points with interior/boundary tags.
///
/// Coordinates are stored flat, `dim` values per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    kinds: Vec<Kind>,
    h: f64,
    seed: u64,
}

impl NodeSet {
    /// Builds a node set from raw parts. Only shape consistency is checked;
    /// the ball invariants are guaranteed by [`discretize_ball`] alone.
    pub fn new(dim: usize, coords: Vec<f64>, kinds: Vec<Kind>, h: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNodeSet("dimension must be positive".into()));
        }
        if coords.len() != dim * kinds.len() {
            return Err(Error::InvalidNodeSet(format!(
                "{} coordinates do not describe {} nodes in {dim}D",
                coords.len(),
                kinds.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidNodeSet("non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            coords,
            kinds,
            h,
            seed,
        })
    }

    /// Convenience constructor from a list of points.
    pub fn from_points(points: &[Vec<f64>], kinds: Vec<Kind>, h: f64, seed: u64) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidNodeSet("points of mixed dimension".into()));
        }
        Self::new(dim, points.concat(), kinds, h, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Nominal spacing the set was generated with.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn kind(&self, i: usize) -> Kind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[Kind] {
        &self.kinds
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices_of(Kind::Interior)
    }

    pub fn boundary(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices_of(Kind::Boundary)
    }

    fn indices_of(&self, kind: Kind) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, &k)| k == kind)
            .map(|(i, _)| i)
    }

    /// Smallest pairwise distance, by brute force. O(N²); meant for checks.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min(dist(self.point(i), self.point(j)));
            }
        }
        best
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
