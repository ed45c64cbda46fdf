use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DOMAIN: i32 = 3;
    pub const CAPACITY: i32 = 4;
    pub const SEARCH_RESOLUTION: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bai_core::Error),

    #[error("usage: {0}")]
    Usage(String),

    /// A verification suite or certificate check failed.
    #[error("verification failed: {0}")]
    Verify(String),

    /// The demo grid was too coarse to contain a witness.
    #[error("no witness found: {0}")]
    NoWitness(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use bai_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Capacity { .. } => exit::CAPACITY,
                E::Argument(_) | E::Parse(_) => exit::USAGE,
                E::Domain(_)
                | E::NotInParameterSet { .. }
                | E::DualDegenerate { .. }
                | E::Construction(_)
                | E::Recommendation { .. } => exit::DOMAIN,
            },
            CliError::Usage(_) | CliError::Io { .. } | CliError::Csv(_) => exit::USAGE,
            CliError::Verify(_) => exit::VERIFY_FAILED,
            CliError::NoWitness(_) => exit::SEARCH_RESOLUTION,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
