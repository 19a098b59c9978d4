//! Strong-form meshless Laplacian stencils on scattered nodes.
//!
//! Two weight engines are provided: weighted least squares over monomials
//! and RBF-FD with polyharmonic splines augmented by monomials (plus the
//! square collocation case). On top of them sit a Dirichlet Poisson solver
//! on the unit ball in 2D/3D and the drivers for stencil-size scans,
//! convergence scans and repeated re-discretization stability studies.

pub mod basis;
pub mod benchmark;
pub mod config;
mod error;
pub mod geometry;
pub mod linalg;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{discretize_ball, Kind, NeighborIndex, NodeSet, Stencil};
pub use weights::{BasisSpec, Engine, StencilWeights, WlsWeight};
