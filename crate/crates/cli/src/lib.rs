//! Command-line driver: configuration layering and the subcommands that
//! chain boundary sampling, dataset generation, solving, training,
//! evaluation and field reconstruction.

pub mod commands;
pub mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bie_core::error::Error),
    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: bie_core::error::Error,
    },
    #[error("{0}")]
    Config(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) | CliError::File { source: e, .. } => e.class(),
            CliError::Config(_) => "config",
        }
    }
}

/// Attaches the file name to errors from reading or writing `path`.
pub fn at<T>(path: &std::path::Path, r: bie_core::error::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}
