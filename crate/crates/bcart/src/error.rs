use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// configuration (2), data degeneracy (3) and artifact mismatch (4).
#[derive(Debug, Error)]
pub enum BcartError {
    #[error("config: {0}")]
    Config(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("covariate `{0}` is not categorical")]
    NotCategorical(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("artifact mismatch: {0}")]
    Mismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BcartError>;

impl BcartError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BcartError::Degenerate(_) => 3,
            BcartError::Mismatch(_) => 4,
            _ => 2,
        }
    }
}
