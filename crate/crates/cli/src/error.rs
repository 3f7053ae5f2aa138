use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: tierblock::Error,
    },

    #[error("{}: {msg}", path.display())]
    Data { path: PathBuf, msg: String },

    #[error("{}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] tierblock::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use tierblock::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Input { .. } | CliError::Data { .. } | CliError::Output { .. } => 2,
            CliError::Core(e) => match e {
                E::Config(_) => 1,
                E::EmptyBlock | E::UnknownBlock(_) | E::TooManyClusters { .. } => 3,
                _ => 2,
            },
            CliError::Internal(_) => 3,
        }
    }

    pub fn input(path: impl Into<PathBuf>) -> impl FnOnce(tierblock::Error) -> Self {
        let path = path.into();
        move |source| CliError::Input { path, source }
    }

    pub fn output(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Output { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
