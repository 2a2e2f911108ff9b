use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} is not a power of two >= 2")]
    InvalidDimension(usize),
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("unknown gate {0:?}")]
    UnknownGate(String),
    #[error("unsupported qubit count {0}")]
    UnsupportedQubits(usize),
    #[error("qubit {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid cluster: {0}")]
    InvalidCluster(String),
    #[error("measurement plan has {found} angles, expected {expected}")]
    PlanLength { expected: usize, found: usize },
    #[error("malformed POVM: {0}")]
    MalformedPovm(String),
    #[error("analyzer settings are not informationally complete (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },
    #[error("no counts recorded")]
    NoCounts,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
