use thiserror::Error;

/// Errors raised anywhere in the tiling, pooling and training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate simplex {0:?}: points are affinely dependent")]
    DegenerateSimplex(Vec<usize>),
    #[error("jitter failed to reach general position after {rounds} rounds")]
    JitterFailed { rounds: usize },
    #[error("point cloud is not in general position ({count} violating subsets, first {first:?})")]
    GeneralPositionViolation { count: usize, first: Vec<usize> },
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("order {k} out of range 1..={max}")]
    OrderOutOfRange { k: usize, max: usize },
    #[error("subset {0:?} is not a registered vertex")]
    UnknownVertex(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear program hit the iteration cap ({0} pivots)")]
    IterationCapExceeded(usize),
    #[error("linear program numerical failure: {0}")]
    LpNumericalFailure(String),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(String),
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("graph is disconnected ({0} zero eigenvalues)")]
    DisconnectedGraph(usize),
    #[error("only {found} non-zero eigenvalues available, need {needed}")]
    TooFewEigenvectors { found: usize, needed: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("record {index}: {msg}")]
    InvariantViolation { index: usize, msg: String },
    #[error("unknown artifact: {0}")]
    UnknownArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 3 for numerical failures, 2 for everything else
    /// (bad input, I/O, unknown artifacts).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IterationCapExceeded(_)
            | Error::LpNumericalFailure(_)
            | Error::NonFiniteActivation(_)
            | Error::NonFiniteLoss
            | Error::DegenerateSimplex(_)
            | Error::JitterFailed { .. } => 3,
            _ => 2,
        }
    }
}
