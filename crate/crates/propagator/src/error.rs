use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evolution time outside the caustic-free window `(0, pi/lambda)`.
    #[error("time {t} outside the caustic-free window (0, {limit})")]
    CausticWindow { t: f64, limit: f64 },

    /// Two grid quantities were combined but live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The grid is too small to hold the smearing kernels or wavepackets.
    #[error("grid fit: {0}")]
    GridFit(String),

    /// A symmetric factorization hit a nonpositive (or zero) pivot.
    /// `index` is the 1-based leading minor that failed.
    #[error("matrix singular or indefinite at leading minor {index}")]
    IndefiniteMatrix { index: usize },

    /// A `ComplexQuadraticForm` invariant does not hold.
    #[error("quadratic form: {0}")]
    QuadraticForm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
