use thiserror::Error;

use crate::solver::IterationTrace;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-integrable quadrature configuration: a = {a}, b = {b} (both must be < 1)")]
    NonIntegrable { a: f64, b: f64 },

    #[error("exponent set not admissible: {}", .0.join("; "))]
    Inadmissible(Vec<String>),

    #[error("Picard iteration diverged after {} iterates", .0.x_norms.len())]
    Divergence(Box<IterationTrace>),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
