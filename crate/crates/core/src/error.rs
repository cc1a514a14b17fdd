use thiserror::Error;

/// Errors raised across the scattering pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular along the path (|det| = {modulus:e} at s = {at})")]
    SingularOnPath { at: f64, modulus: f64 },

    #[error("determinant argument jumps by {jump} rad between path samples at s = {at}")]
    AmbiguousBranch { at: f64, jump: f64 },

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("polynomial degree {degree} exceeds the cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bump radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("vectors are not orthogonal (|η·ω| = {0:e})")]
    NotOrthogonal(f64),

    #[error("vector is not a unit vector (|ω| = {0})")]
    NotUnit(f64),

    #[error("momentum is off the energy shell (|ξ| = {0})")]
    OffShell(f64),

    #[error("step size underflow at t = {t} (step {step:e})")]
    StepFailure { t: f64, step: f64 },

    #[error("trajectory still interacting after t = {0}; the flow looks trapped")]
    TrappedTrajectory(f64),

    #[error("action routes disagree by {0:e}")]
    ActionMismatch(f64),

    #[error("caustic: |det| = {0:e}")]
    CausticError(f64),

    #[error("propagation order {0} is not supported (only the leading order 0 is)")]
    UnsupportedOrder(usize),

    #[error("grid box too small: boundary mass {0:e}")]
    BoxTooSmall(f64),

    #[error("distribution is multimodal ({0} separated peaks)")]
    Multimodal(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
