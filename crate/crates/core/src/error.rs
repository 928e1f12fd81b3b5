use thiserror::Error;

use crate::graphstate::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("state norm deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },
    #[error("operand list is empty")]
    EmptyList,
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("qubit index {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("basis is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("cannot force a branch of probability {probability:e}")]
    ZeroProbabilityBranch { probability: f64 },
    #[error("not a permutation of 0..{0}")]
    InvalidPermutation(usize),
    #[error("invalid graph: {}", join(.0))]
    InvalidGraph(Vec<Violation>),
    #[error("graph is already decorated")]
    AlreadyDecorated,
    #[error("{needed} qubits exceed the cap of {cap}")]
    SizeCap { needed: usize, cap: usize },
    #[error("malformed pattern: {0}")]
    MalformedPattern(String),
    #[error("graph is not a union of linear clusters: {0}")]
    NotLinearCluster(String),
    #[error("slot `{0}` has no assigned operation")]
    MissingSlot(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("probability {0} lies outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("probability has imaginary part {0:e}")]
    NonRealProbability(f64),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(&'static str),
    #[error("not a valid game instance: all-zero fidelity {fidelity}")]
    InvalidGameInstance { fidelity: f64 },
    #[error("decorated-state constructions disagree: fidelity {fidelity}")]
    ConstructionMismatch { fidelity: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
