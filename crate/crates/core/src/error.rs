use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    /// Every coefficient through the truncation order was below tolerance.
    #[error("perfect to order {order}: no coefficient above tolerance")]
    PerfectToOrder { order: usize },

    /// A coefficient fell between `zero_tol` and `10 * zero_tol`.
    #[error("ambiguous coefficient at order {order} (|c| = {magnitude:e}, tol = {tol:e}); raise precision bits")]
    Ambiguous {
        order: usize,
        magnitude: f64,
        tol: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("search exhausted: best objective {best_objective:e}")]
    SearchExhausted { best_objective: f64 },

    #[error("i/o: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
