use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero probability for word of length {0}")]
    ZeroProbability(usize),
    #[error("gadget too large for explicit representation ({columns} columns, cap {cap})")]
    TooManyColumns { columns: String, cap: usize },
    #[error("class enumeration exceeded cap {0}")]
    TooManyClasses(usize),
    #[error("construction failed at stage {stage}: {reason}")]
    Stage { stage: usize, reason: String },
    #[error("trajectory of length {wanted} does not fit ({available} levels available)")]
    TrajectoryOverflow { wanted: usize, available: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
