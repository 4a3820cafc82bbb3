use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest entry {} is missing or empty", path.display())]
    EmptyArtifact { path: PathBuf },

    #[error(transparent)]
    Core(#[from] anosov_core::Error),
}

impl LabError {
    /// Usage, config and I/O failures all map to exit code 1.
    pub fn exit_code(&self) -> i32 {
        1
    }
}
