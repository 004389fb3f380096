use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("line {line}: unknown column `{column}`")]
    UnknownColumn { line: usize, column: String },

    #[error("line {line}: expected column `{expected}`, found `{found}`")]
    ColumnOrder { line: usize, expected: String, found: String },

    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },

    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Parse { line: usize, column: String, value: String },

    #[error("line {line}, column `{column}`: level {value} is not one of {levels:?}")]
    LevelOutOfRange { line: usize, column: String, value: i64, levels: Vec<i64> },

    #[error("line {line}, column `{column}`: missing value not allowed")]
    MissingNotAllowed { line: usize, column: String },

    #[error("line {line}: outcome column `{column}` is missing")]
    MissingOutcome { line: usize, column: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` is continuous; discretize it first")]
    ContinuousVariable(String),

    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("class {0} is absent from the training data")]
    MissingClass(u8),

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for problems with the caller's input files rather than with modeling.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::MissingClass(_) | Error::Convergence(_) | Error::Undefined(_))
    }
}
