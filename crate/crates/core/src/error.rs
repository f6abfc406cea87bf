use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("point {point:?} lies outside the domain")]
    Domain { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, eigenvalue: f64 },

    #[error("metric is not symmetric at {point:?} (asymmetry {asymmetry:e})")]
    NotSymmetric { point: Vec<f64>, asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parameter {0} outside [0, 1]")]
    Parameter(f64),

    #[error("curves do not join: gap {gap:e}")]
    Join { gap: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("curve is not absolutely continuous: {0}")]
    NotAbsolutelyContinuous(String),

    #[error("inconsistent distance: chord sum dropped by {drop:e} at depth {depth} (slack {slack:e})")]
    InconsistentDistance { depth: usize, drop: f64, slack: f64 },

    #[error("metric derivative did not converge at {failed} of {total} nodes")]
    DerivativeDiagnostic { failed: usize, total: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("chart cover does not contain the curve at t = {t}")]
    Cover { t: f64 },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
