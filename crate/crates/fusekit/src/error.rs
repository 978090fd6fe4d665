use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Schema construction or validation failure.
    #[error("schema: {0}")]
    Schema(String),
    /// Data does not conform to its schema (parse failures, undeclared
    /// category codes, block missingness violations).
    #[error("data: {0}")]
    Data(String),
    /// Regression engine failure (rank deficiency, degenerate inputs).
    #[error("regression: {0}")]
    Regression(String),
    /// Matcher precondition or runtime failure.
    #[error("match: {0}")]
    Match(String),
    /// Monte Carlo harness failure.
    #[error("simulation: {0}")]
    Simulation(String),
    /// Config file parse failure.
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code class: 2 for data/validation problems, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Data(_) | Error::Config(_) | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
