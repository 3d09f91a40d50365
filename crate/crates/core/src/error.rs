use thiserror::Error;

use crate::spectral::BasisKind;

/// Errors raised by the simulation and verification kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("at least one spectral mode is required")]
    ZeroModes,
    #[error("thin-film viscosity must be nonnegative, got {0}")]
    NegativeViscosity(f64),
    #[error("noise weight q_{index} = {value} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid of {grid} points is too coarse, at least {required} required")]
    GridTooCoarse { grid: usize, required: usize },
    #[error("delta = {0} outside the open interval (0, 1/2)")]
    DeltaOutOfRange(f64),
    #[error("basis mismatch: expected {expected:?}, found {found:?}")]
    BasisMismatch { expected: BasisKind, found: BasisKind },
    #[error("path needs at least two grid points")]
    EmptyPath,
    #[error("mismatched time grids")]
    GridMismatch,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Hölder data missing for mode {0}")]
    MissingHolder(usize),
    #[error("Lyapunov constants have not been calibrated")]
    MissingCalibration,
    #[error("trajectory was simulated without the Y/W decomposition")]
    MissingDecomposition,
    #[error("need at least {required} batches, have data for {available}")]
    InsufficientBatches { required: usize, available: usize },
    #[error("functional {functional} is not finite at snapshot {index}")]
    NonFiniteFunctional { functional: String, index: usize },
    #[error("blow-up at t = {time}: |X| = {norm} exceeds guard {guard}")]
    BlowUp { time: f64, norm: f64, guard: f64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
