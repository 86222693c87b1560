use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension {n} out of range (max {max})")]
    Dimension { n: u32, max: u32 },
    #[error("table has {got} entries, expected {expected}")]
    TableLength { got: usize, expected: usize },
    #[error("value {0} is not +1 or -1")]
    NotPlusMinusOne(i64),
    #[error("spectrum does not come from a Boolean function")]
    NotBoolean,
    #[error("fewer than two nonzero coefficients")]
    TooSparse,
    #[error("linear form is zero")]
    ZeroForm,
    #[error("linear form {0:#b} does not fit the current dimension")]
    FormOutOfRange(u64),
    #[error("linear form is dependent on earlier constraints")]
    DependentForm,
    #[error("spectral norm is 1, function is a signed character")]
    NormOne,
    #[error("shift must be nonzero")]
    ZeroShift,
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("query budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::BadParam(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
