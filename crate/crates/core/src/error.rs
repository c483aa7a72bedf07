use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("support direction must be nonzero")]
    ZeroDirection,

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("state {x:?} lies outside the domain box")]
    OutsideDomain { x: Vec<f64> },

    #[error("time {t} lies outside [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("root finding for the inverse map diverged (residual {residual:e})")]
    RootFinding { residual: f64 },

    #[error("step size too large: l*h = {lh} violates the bound {bound}")]
    StepsizeTooLarge { lh: f64, bound: f64 },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("implicit step {index} failed: {source}")]
    StepFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point is not in the set (distance {distance:e})")]
    PointNotInSet { distance: f64 },

    #[error("point is not on the graph (distance {distance:e})")]
    PointNotOnGraph { distance: f64 },

    #[error("unsupported expression: {0}")]
    UnsupportedExpression(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("mode PkTilde requires an integrand independent of v")]
    ModeMismatch,

    #[error("integrand is not certifiably convex in v")]
    NonConvexIntegrand,

    #[error("no feasible start found")]
    Infeasible,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
