use thiserror::Error;

use crate::flow::Clause;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: ||M - M^H||_F = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not unitary: ||U^H U - I||_F = {deviation:e} exceeds {tolerance:e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("kick period must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("family has no parameter period")]
    MissingPeriod,

    #[error("exp(-i {period} V) deviates from identity by {defect:e}")]
    NotPeriodic { period: f64, defect: f64 },

    #[error("degenerate spectrum at lambda = {lambda}: clusters {clusters:?}")]
    DegenerateSpectrum {
        lambda: f64,
        clusters: Vec<Vec<usize>>,
    },

    #[error(
        "tracking ambiguity at step {step} (lambda = {lambda}): best overlap {overlap} below match floor"
    )]
    TrackingAmbiguity {
        step: usize,
        lambda: f64,
        overlap: f64,
    },

    #[error("track of level {level} does not close after {cycles} cycles (ends on level {end_level})")]
    OpenTrack {
        level: usize,
        cycles: usize,
        end_level: usize,
    },

    #[error("lambda = {lambda} is not a point of the flow grid")]
    GridMismatch { lambda: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),

    #[error("perturbation vector is an eigenvector of the unperturbed operator")]
    VIsEigenvector,

    #[error("reduction leaves an empty space")]
    EmptyReduction,

    #[error("certification failed on clause {clause}: residual {residual:e}")]
    CertificationFailure { clause: Clause, residual: f64 },
}
