use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error at {}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("could not build worker pool: {0}")]
    Workers(String),
}
