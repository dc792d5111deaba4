use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis index {index} out of range for {n_qubits} qubit(s) (dimension {dim})")]
    IndexOutOfRange {
        index: usize,
        n_qubits: usize,
        dim: usize,
    },

    #[error("qubit count mismatch: operator acts on {expected} qubit(s), state has {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("operator is not an involution: square equals {square}·I, expected I")]
    NonInvolutory { square: f64 },

    #[error("time {t} outside the schedule domain [0, {total_time}]")]
    TimeOutOfRange { t: f64, total_time: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("dense representation limited to {cap} qubits, requested {requested}")]
    DimensionCap { cap: usize, requested: usize },

    #[error("state norm {norm} deviates from 1 by more than {tolerance}")]
    NormCorrupted { norm: f64, tolerance: f64 },

    #[error("time step {dt} does not divide total time {total_time}")]
    NonDivisibleStep { dt: f64, total_time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
