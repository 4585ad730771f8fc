use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied map returned NaN or infinity.
    #[error("non-finite evaluation at output coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },

    /// A matrix expected to be in SO(n) failed the orthogonality check.
    #[error("invalid group element: orthogonality defect {defect:.3e} exceeds {tol:.3e}")]
    InvalidGroupElement { defect: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// The horizontal frame vectors are numerically dependent.
    #[error("degenerate horizontal frame at sampled point (Gram determinant {gram_det:.3e})")]
    DegenerateFrame { gram_det: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A trajectory left the chart domain; carries the last valid sample time.
    #[error("trajectory left the chart domain at t = {t}")]
    DomainExit { t: f64 },

    /// Shape point outside the Veselova chart floor gamma_n >= delta.
    #[error("chart floor violation: gamma_n = {gamma_n:.6} < delta = {delta}")]
    ChartFloorViolation { gamma_n: f64, delta: f64 },

    #[error("adaptive step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("implicit midpoint fixed-point iteration diverged at tau = {tau}")]
    FixedPointDivergence { tau: f64 },

    #[error("system is not phi-simple (pattern residual {residual:.3e})")]
    NotPhiSimple { residual: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
