use std::path::PathBuf;

use ncverify_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 bad input, 3 I/O, 4 infeasible constants, 5 resource cap.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                CoreError::Infeasible(_) | CoreError::DegenerateConstants(_) => 4,
                CoreError::TooLarge { .. } => 5,
                CoreError::ObjectiveError => 1,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Csv { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
