use certds::error::Error as CoreError;
use certds::learner::LearnError;
use thiserror::Error;

/// Errors surfaced by the command-line tool; each maps to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("learning failed: {0}")]
    Learn(#[from] LearnError),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LEARN: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_IO: i32 = 5;

impl CliError {
    pub fn schema(path: impl std::fmt::Display, reason: impl std::fmt::Display) -> Self {
        CliError::Schema {
            path: path.to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } => EXIT_USAGE,
            CliError::Learn(LearnError::SampleInUnsafeSet { .. } | LearnError::AttractorInUnsafeSet(_)) => EXIT_USAGE,
            CliError::Learn(LearnError::Core(e)) | CliError::Core(e) => core_exit_code(e),
            CliError::Learn(_) => EXIT_LEARN,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidInput(_)
        | CoreError::DimensionMismatch { .. }
        | CoreError::DegenerateAxis { .. }
        | CoreError::OddDegree(_) => EXIT_USAGE,
        CoreError::InfeasibleFit { .. } => EXIT_VERIFY,
        _ => EXIT_LEARN,
    }
}
