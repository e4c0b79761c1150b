use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate sensitivity scores: {0}")]
    DegenerateScores(String),

    #[error("infeasible class budget for class {class}: {message}")]
    InfeasibleBudget { class: usize, message: String },

    #[error("weight strategy `{strategy}` infeasible for class {class}: {message}")]
    StrategyInfeasible {
        strategy: String,
        class: usize,
        message: String,
    },

    #[error("training requires both classes with positive weight, found only class {0}")]
    SingleClass(usize),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CoreError {
    fn from(err: csv::Error) -> Self {
        let row = err.position().map(|p| p.line() as usize).unwrap_or_default();
        CoreError::Csv {
            row,
            column: String::new(),
            message: err.to_string(),
        }
    }
}
