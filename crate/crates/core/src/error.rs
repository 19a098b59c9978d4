use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),

    #[error("target node count {target} is too small, need at least {min}")]
    TooFewNodes { target: usize, min: usize },

    #[error("invalid node set: {0}")]
    InvalidNodeSet(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("stencil size {n} is outside [1, {count}]")]
    InvalidStencilSize { n: usize, count: usize },

    #[error("stencil of {n} nodes cannot carry {s} basis functions ({detail})")]
    StencilBasisMismatch { n: usize, s: usize, detail: &'static str },

    #[error("all stencil points coincide with the center")]
    DegenerateStencil,

    #[error("singular local system (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    #[error("Laplacian of the r^{k} spline is singular at r = 0")]
    SingularPhs { k: u32 },

    #[error("PHS exponent must be at least 1")]
    InvalidPhsExponent,

    #[error("node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing stencil weights for interior node {0}")]
    MissingWeights(usize),

    #[error("linear solve failed: {0}")]
    Factorization(String),

    #[error("iterative solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("exact solution vanishes at every node")]
    ZeroSolution,

    #[error("no finite error values to summarize")]
    NoFiniteErrors,

    #[error("order estimate needs at least 3 points with finite error, got {0}")]
    InsufficientPoints(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed CSV: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_node(node: usize, source: Error) -> Self {
        Error::AtNode {
            node,
            source: Box::new(source),
        }
    }
}
