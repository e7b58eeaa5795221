use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument is malformed (wrong size, empty grid, even leg count, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative procedure hit its iteration cap.
    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    /// The design matrix lost full column rank.
    #[error("rank deficient design; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// An estimation could not be carried out on the data at hand.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A kernel query had no training point with positive weight.
    #[error("query {query} is outside the kernel support of the training data")]
    OutOfSupport { query: f64 },

    /// Residuals carry no spread, so no density can be fitted.
    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    /// A referenced column does not exist.
    #[error("unknown column: {0}")]
    UnknownColumn(String),

    /// Malformed panel or configuration file.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing required column(s): {0}")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
