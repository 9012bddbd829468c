use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("model integrity: masses sum to {sum} (tolerance {tol})")]
    ModelIntegrity { sum: f64, tol: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("K = {k} is not divisible by N = {n}")]
    Divisibility { k: usize, n: usize },

    #[error("desk-scale exceeded: {what} needs {size}, limit is {limit}")]
    DeskScale {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("symbol {symbol} outside alphabet of size {q}")]
    Alphabet { symbol: u32, q: usize },

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("inconsistent overlap assignment at dataset {dataset}")]
    InconsistentOverlap { dataset: usize },

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("graph mismatch: {0}")]
    GraphMismatch(String),

    #[error("side information marginal does not match the vertex pmf (max deviation {0:e})")]
    MarginalMismatch(f64),

    #[error("codebook not decodable by servers {subset:?}: {reason}")]
    Undecodable { subset: Vec<usize>, reason: String },

    #[error("premise violated: {0}")]
    Premise(String),

    #[error("ordering {ordering:?} does not determine the demanded functions")]
    InsufficientOrdering { ordering: Vec<usize> },

    #[error("color collision for servers {subset:?}: one color profile maps to two outputs")]
    Collision { subset: Vec<usize> },

    #[error("servers {subset:?} do not cover dataset {dataset}")]
    Coverage { subset: Vec<usize>, dataset: usize },

    #[error("solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
}

impl Error {
    /// Process exit code for command-line front ends.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DeskScale { .. } => 3,
            Error::NonConvergence { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn desk(what: &'static str, size: u128, limit: u128) -> Self {
        Error::DeskScale { what, size, limit }
    }
}
