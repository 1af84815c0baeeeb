use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("missing weight `{0}`")]
    MissingWeight(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("state error: {0}")]
    State(String),

    #[error("unpaired files in {dir}: {stems:?}")]
    Pairing { dir: PathBuf, stems: Vec<String> },

    #[error("no samples found under {0}")]
    EmptyManifest(PathBuf),

    #[error("non-finite loss component `{component}` at iteration {iteration}")]
    NonFinite { component: String, iteration: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unsupported device `{0}` (this build only provides `cpu`)")]
    Device(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
