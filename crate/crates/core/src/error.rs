use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1} qubits")]
    Dimension(usize, usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("qubit pair ({0}, {1}) must be distinct")]
    DuplicateQubit(usize, usize),
    #[error("{what} exceeds the dense cap ({cap} qubits)")]
    CapExceeded { what: String, cap: usize },
    #[error("noise weight {0} is outside [0, 1]")]
    NoiseOutOfRange(f64),
    #[error("operator is not Hermitian")]
    NotHermitian,
    #[error("operator does not square to identity")]
    NotInvolution,
    #[error("string {0} does not factor into the block alphabet of one family")]
    Structural(String),
    #[error("unsupported witness kind {kind} for N = {n}")]
    Unsupported { kind: String, n: usize },
    #[error("witness never detects: {0}")]
    NonDetecting(String),
    #[error("budget {0} is infeasible")]
    Infeasible(u128),
    #[error("empty mask")]
    EmptyMask,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
