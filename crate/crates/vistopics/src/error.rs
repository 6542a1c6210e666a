use std::path::PathBuf;

/// Pipeline failure, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} has not been run; run `vistopics {command}` first")]
    StageNotRun {
        stage: &'static str,
        command: &'static str,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 2 for usage, configuration, and missing-prerequisite errors; 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::StageNotRun { .. } => 2,
            _ => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    vistopics_core::lda::LdaError,
    vistopics_core::text::TextError,
    vistopics_core::topics::TopicError,
    vistopics_core::validation::ValidationError,
    vistopics_core::HashError
);

pub type Result<T, E = Error> = std::result::Result<T, E>;
