/// Errors returned by the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("guard length {guard_len} exceeds transform size {n_fft}")]
    InvalidGuard { guard_len: usize, n_fft: usize },

    #[error("window rolloff {rolloff} exceeds guard length {guard_len}")]
    InvalidRolloff { rolloff: usize, guard_len: usize },

    #[error("PAPR is undefined for an empty or all-zero signal")]
    UndefinedPapr,

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("bit count {len} is not a multiple of {multiple}; padding required")]
    PaddingRequired { len: usize, multiple: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing differential reference: {0}")]
    MissingReference(String),

    #[error("invalid length: expected {expected}, got {actual}")]
    InvalidLength { expected: usize, actual: usize },

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("timing offset {offset} out of range for {len} samples")]
    InvalidOffset { offset: isize, len: usize },

    #[error("synchronization not found: {0}")]
    NotFound(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("zero training value on subcarrier {0}")]
    DegenerateTraining(usize),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of receiver estimation (as opposed to bad input or config).
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::NotFound(_) | Error::EstimationFailed(_) | Error::DegenerateTraining(_)
        )
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
