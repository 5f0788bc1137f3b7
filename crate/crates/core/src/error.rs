use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("duplicate cell ({country}, {indicator}, {year})")]
    DuplicateCell {
        country: String,
        indicator: String,
        year: i32,
    },

    #[error("line {line}, column `{column}`: non-numeric value `{value}`")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("nonpositive value {value} at ({country}, {indicator}, {year})")]
    NonPositive {
        country: String,
        indicator: String,
        year: i32,
        value: f64,
    },

    #[error("missing value at ({country}, {indicator}, {year})")]
    MissingValue {
        country: String,
        indicator: String,
        year: i32,
    },

    #[error("year window [{start}, {end}] outside panel range [{first}, {last}]")]
    WindowOutOfRange {
        start: i32,
        end: i32,
        first: i32,
        last: i32,
    },

    #[error("mismatched axes: {0}")]
    Mismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("linear program is {0}")]
    Lp(String),

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    #[error("no root on the admissible bracket: {0}")]
    NoRoot(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn short(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
