//! Error taxonomy shared by every module in this crate.

use crate::inverse::IdentHistory;

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A problem or solver configuration is structurally invalid.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Two fields (or a field and a problem) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A field has the wrong number of entries for its grid.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Coefficient identification finished without a single converged
    /// forward solve; the full evaluation history is attached.
    #[error("every objective evaluation had a non-converged forward solve")]
    AllEvaluationsDiverged { history: IdentHistory },
}

pub type Result<T> = std::result::Result<T, Error>;
