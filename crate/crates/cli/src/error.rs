use lowdev_core::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{op} failed: {source}")]
    Numerical { op: String, source: Error },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Errors raised while building a model from the config.
    pub fn from_model(e: Error) -> Self {
        match e {
            Error::UnsupportedRegime(m) => CliError::Unsupported(format!("unsupported regime: {m}")),
            Error::InvalidOffspring(_) | Error::InvalidStep(_) | Error::InvalidSpec(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical { op: "model construction".into(), source: other },
        }
    }

    /// Errors raised by a named operation.
    pub fn op(op: &str) -> impl FnOnce(Error) -> Self + '_ {
        move |e| match e {
            Error::UnsupportedRegime(m) => CliError::Unsupported(format!("{op}: unsupported regime: {m}")),
            other => CliError::Numerical { op: op.to_string(), source: other },
        }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::Numerical { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }
}
