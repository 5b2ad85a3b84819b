use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid flag: {0}")]
    Flag(String),

    #[error("flag conflict: {0}")]
    FlagConflict(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Library(#[from] adasketch::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for flag problems, 3 for data problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use adasketch::Error as E;
        match self {
            CliError::Flag(_) | CliError::FlagConflict(_) => 2,
            CliError::Data(_) | CliError::Io { .. } | CliError::Json { .. } => 3,
            CliError::Library(e) => match e {
                E::InvalidDecay(_)
                | E::InvalidProbability(_)
                | E::InvalidSparsity { .. }
                | E::SketchTooLarge { .. }
                | E::InvalidParameter(_) => 2,
                E::MalformedCsv { .. }
                | E::NonNumericField { .. }
                | E::BadMatrixFile { .. }
                | E::NonFinite { .. }
                | E::DimensionMismatch { .. }
                | E::Io(_) => 3,
                E::NotPositiveDefinite { .. }
                | E::NotPowerOfTwo(_)
                | E::ConvergenceFailure(_)
                | E::NegativeValue(_)
                | E::BreakdownDetected { .. } => 4,
            },
        }
    }
}
