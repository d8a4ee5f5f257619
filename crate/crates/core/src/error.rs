//! Error type shared across the toolkit.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two isolines never meet on the search domain.
    #[error("no intersection: {0}")]
    NoIntersection(String),

    /// The isolines coincide over an unbounded segment; no point solution exists.
    #[error("unbounded solution: {0}")]
    UnboundedSolution(String),

    /// No (position, force) hypothesis is consistent with all readings.
    #[error("empty feasible region: {0}")]
    EmptyRegion(String),

    /// Too few isoline crossings to fit a curve.
    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),

    /// The fit problem is rank deficient.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Training loss left the finite range.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Too many estimation trials failed to converge.
    #[error("non-convergent: {0}")]
    NonConvergent(String),

    /// Request exceeds the supported problem size.
    #[error("complexity limit: {0}")]
    ComplexityLimit(String),

    /// A probe point lies outside the sensing extent.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// Vector lengths or layout dimensionalities do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty test split")]
    EmptyTestSplit,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
