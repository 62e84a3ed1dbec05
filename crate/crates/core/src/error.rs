use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Table or pattern has the wrong shape.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid construction or function parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Iterative computation did not reach its tolerance.
    #[error("numerical error: {message} (final residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    /// Conditioning event has probability zero.
    #[error("conditioning error: event {event} has zero probability")]
    Conditioning { event: String },

    /// No window of a sampled trajectory matches the pattern.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Enumeration would exceed the configured budget.
    #[error("cost error: estimated work {estimated} exceeds budget {budget}")]
    Cost { estimated: u128, budget: u128 },

    /// Text input (pattern literal, model file) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
