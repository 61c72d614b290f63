use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image {width}x{height} too small for {levels} MS-SSIM levels (needs min side {required}); at most {max_levels} levels fit")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
        required: usize,
        max_levels: usize,
    },

    #[error("image {width}x{height} is smaller than the {min}-pixel minimum side for {what}")]
    ImageBelowMinimum {
        width: usize,
        height: usize,
        min: usize,
        what: &'static str,
    },

    #[error("no plug-in supplied for nonzero weight `{0}`")]
    MissingPlugin(&'static str),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("scorer failed on sample {index}: {detail}")]
    Scorer { index: usize, detail: String },

    #[error("finite-difference gradient needs latent dim <= {max}, got {dim}")]
    FiniteDifferenceTooLarge { dim: usize, max: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix has a strongly negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("Fréchet distance {0:e} is negative beyond round-off tolerance")]
    NegativeDistance(f64),

    #[error("{what}: parse error at line {line}, column {column}: {message}")]
    Parse {
        what: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
