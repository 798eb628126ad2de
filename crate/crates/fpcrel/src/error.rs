use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fpcrel_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: malformed rows at lines {}: {first}", path.display(), join_lines(lines))]
    Malformed { path: PathBuf, lines: Vec<usize>, first: String },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cache file {}: {reason}", path.display())]
    Cache { path: PathBuf, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_lines(lines: &[usize]) -> String {
    const SHOWN: usize = 20;
    let mut s: Vec<String> = lines.iter().take(SHOWN).map(|l| l.to_string()).collect();
    if lines.len() > SHOWN {
        s.push(format!("... ({} more)", lines.len() - SHOWN));
    }
    s.join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        use fpcrel_core::Error as C;
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Core(C::NoConvergence | C::EigenvalueSpacing { .. }) => 3,
            Error::Core(C::NuMismatch | C::TableTooSmall { .. } | C::InvalidArgument(_)) => 1,
            _ => 2,
        }
    }
}
