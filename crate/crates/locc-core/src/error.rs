//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by channel, tree, and pruning operations.
///
/// Semantic validation findings (a tree failing a structural condition) are
/// *reported*, not raised; only structural misuse, malformed inputs, and
/// numerical breakdowns surface as errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |M - M^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Kraus completeness violated: ||sum K^H K - I||_F = {residual:.3e}")]
    CompletenessViolation { residual: f64 },

    #[error("operator lies outside the Kraus span: residual {residual:.3e} exceeds {tolerance:.3e}")]
    SpanResidual { residual: f64, tolerance: f64 },

    #[error("coefficient matrix is {got}x{got} but the representation has kappa = {kappa}")]
    KappaMismatch { got: usize, kappa: usize },

    #[error("tree is structurally malformed: {0}")]
    MalformedTree(String),

    #[error("tree failed validation: {0}")]
    InvalidTree(String),

    #[error("node {node} does not factor across party {party}'s cut")]
    FactorizationFailed { node: u64, party: usize },

    #[error("random instrument construction degenerated after {retries} retries")]
    DegenerateInstrument { retries: usize },

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unsupported document version {found:?} (expected {expected:?})")]
    UnsupportedVersion { found: String, expected: String },

    #[error("malformed document: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
