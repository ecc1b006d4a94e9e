use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Divergence(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(cfel_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Verify(_) | CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

impl From<cfel_core::Error> for CliError {
    fn from(e: cfel_core::Error) -> Self {
        use cfel_core::Error as E;
        match e {
            E::Divergence { .. } => CliError::Divergence(e.to_string()),
            E::Config(_) | E::Format(_) | E::Dimension { .. } | E::EmptyDataset { .. } | E::Domain(_) | E::Invariant(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(cfel_core::Error::Json(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
