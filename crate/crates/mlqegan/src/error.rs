//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; the message names the offending field path.
    #[error("config: {0}")]
    Config(String),

    /// Tensor or image dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid pixel data (non-finite values, unsupported bit depth, ...).
    #[error("image: {0}")]
    Image(String),

    /// A request that cannot be satisfied (e.g. more non-overlapping patches
    /// than the image holds).
    #[error("infeasible request: {0}")]
    Infeasible(String),

    /// Degenerate input for which a metric is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed or inconsistent dataset manifest.
    #[error("manifest: {0}")]
    Manifest(String),

    /// Corrupt or incompatible checkpoint archive.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// The training loss became non-finite.
    #[error("training diverged at step {step}: {what}")]
    Diverged { step: u64, what: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    TomlParse(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration errors, 2 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::TomlParse(_) => 1,
            _ => 2,
        }
    }
}
