use std::path::PathBuf;

/// Process exit status for a clean run that did not reject the model.
pub const EXIT_OK: i32 = 0;
/// Usage, configuration, IO or parse failure.
pub const EXIT_CONFIG: i32 = 2;
/// The misspecification test rejected the training model.
pub const EXIT_REJECT: i32 = 3;
/// Training or evaluation produced non-finite numbers.
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: line {line}: {detail}", path.display())]
    Parse { path: PathBuf, line: u64, detail: String },

    #[error("model card {}: {detail}", path.display())]
    Card { path: PathBuf, detail: String },

    #[error(transparent)]
    Core(#[from] mspec_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mspec_core::Error as E;
        match self {
            CliError::Core(E::Numerical { .. } | E::NonFinite { .. } | E::Simulator { .. }) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
