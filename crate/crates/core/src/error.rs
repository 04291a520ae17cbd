use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("empty seed set")]
    EmptySeeds,
    #[error("brute-force isomorphism is limited to {limit} nodes, got {nodes}")]
    IsomorphismGuard { nodes: usize, limit: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("backward requires a 1x1 output, got {0:?}")]
    NonScalarOutput((usize, usize)),
    #[error("loss function is not deterministic: {first} vs {second}")]
    NonDeterministic { first: f64, second: f64 },
    #[error("non-positive standard deviation {0}")]
    NonPositiveSigma(f64),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("training diverged at epoch {epoch}: total loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("cannot sample {requested} negative pairs, only {available} non-edges exist")]
    NegativeSampling { requested: usize, available: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used for process exit statuses.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Diverged { .. } | Error::NonDeterministic { .. } | Error::NonPositiveSigma(_) => {
                ErrorKind::Numerical
            }
            Error::Parse { .. }
            | Error::Data { .. }
            | Error::Checkpoint(_)
            | Error::Io { .. }
            | Error::NodeOutOfRange(..)
            | Error::SelfLoop(_)
            | Error::DuplicateEdge(..) => ErrorKind::Data,
            _ => ErrorKind::Invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    Invalid,
}
