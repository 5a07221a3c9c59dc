use thiserror::Error;

/// Errors raised by the engine and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Spatial or channel extents that cannot be combined.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Two tensors that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A NaN or infinity appeared in the output of an operation.
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    /// A network description that fails validation.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation's input contract does not hold (empty sample set, too few looks, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Optimisation diverged or produced unusable parameters.
    #[error("training failed: {0}")]
    Training(String),

    /// Malformed on-disk data.
    #[error("format error: {0}")]
    Format(String),

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("kappa undefined: chance agreement equals total agreement")]
    DegenerateKappa,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
