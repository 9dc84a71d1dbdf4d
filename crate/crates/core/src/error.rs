use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Fock cutoff: n_max must be >= 1, got {0}")]
    InvalidCutoff(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("operation requires a {expected} state")]
    WrongSpace { expected: &'static str },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires the {expected} picture, got {found}")]
    PictureMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("tolerance {0} outside the supported range [1e-12, 1e-4]")]
    InvalidTolerance(f64),

    #[error("step size underflow at t = {t} (h = {h:e}); the problem is too stiff for the explicit integrator")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("no zero crossing of <sigma_z> within the integrated horizon t <= {horizon}")]
    NoZeroCrossing { horizon: f64 },

    #[error("no flux crossing found for g/kappa in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("both endpoints eps/kappa = {lo} and {hi} fall in the same regime (crossing = {crossing})")]
    SameRegime { lo: f64, hi: f64, crossing: bool },
}

pub type Result<T> = std::result::Result<T, Error>;
