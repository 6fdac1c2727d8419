//! Crate-level error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario parameter is outside its documented range.
    #[error("invalid config: {field}: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },

    /// A link distance collapsed to zero while distance clamping is disabled.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Vector arguments do not agree with the device count.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested oracle grid would take too many evaluations.
    #[error("oracle grid too large: {evaluations} evaluations exceed the limit of {limit}")]
    GridTooLarge { evaluations: u128, limit: u128 },

    /// The oracle is restricted to small device counts by design.
    #[error("oracle supports at most {max} devices, got {got}")]
    TooManyDevices { got: usize, max: usize },

    /// Optimality gap is undefined for infeasible solutions.
    #[error("gap undefined: {0}")]
    GapUndefined(String),
}
