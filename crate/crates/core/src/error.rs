use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid mismatch: {left} points vs {right} points")]
    GridMismatch { left: usize, right: usize },
    #[error("grid needs at least {min} points, got {got}")]
    GridTooSmall { got: usize, min: usize },
    #[error("curve has {got} values, grid has {expected} points")]
    LengthMismatch { got: usize, expected: usize },
    #[error("non-finite value at curve {curve}, point {point}")]
    NonFinite { curve: usize, point: usize },
    #[error("sample '{label}' has {got} curves, need at least {min}")]
    SampleTooShort { label: String, got: usize, min: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("basis function {index} is not identified by the data ({reason})")]
    RankDeficient { index: usize, reason: &'static str },
    #[error("eigenvalues {j} and {k} are too close to divide by ({gap:e})")]
    EigenvalueSpacing { j: usize, k: usize, gap: f64 },
    #[error("null table was simulated for a different measure nu")]
    NuMismatch,
    #[error("null table has {got} replicates, decisions need at least {min}")]
    TableTooSmall { got: usize, min: usize },
    #[error("invalid date {year}-{month:02}-{day:02}")]
    InvalidDate { year: i32, month: u32, day: u32 },
    #[error("duplicate record for {date} on lines {first} and {second}")]
    DuplicateRecord { date: String, first: usize, second: usize },
    #[error("eigensolver failed to converge")]
    NoConvergence,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
