use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("window sum-square vanishes at sample {index}")]
    ZeroWindowSum { index: usize },

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("scene sampling exhausted {attempts} attempts")]
    RetryExhausted { attempts: usize },

    #[error("zero-energy reference signal")]
    ZeroEnergyReference,

    #[error("too many sources for exhaustive permutation search: {0} (max 4)")]
    TooManySources(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient at step {step}: {detail}")]
    NonFiniteGradient { step: usize, detail: String },

    #[error("training diverged at step {step}: loss {loss} vs initial {initial}")]
    Diverged { step: usize, loss: f64, initial: f64 },

    #[error("feature width mismatch: checkpoint expects {checkpoint}, feature mode produces {features}")]
    WidthMismatch { checkpoint: usize, features: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-parsable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::SignalTooShort { .. } => "signal_too_short",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::ZeroWindowSum { .. } => "zero_window_sum",
            Error::InvalidWaveform(_) => "invalid_waveform",
            Error::SampleRateMismatch { .. } => "sample_rate_mismatch",
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::RetryExhausted { .. } => "retry_exhausted",
            Error::ZeroEnergyReference => "zero_energy_reference",
            Error::TooManySources(_) => "too_many_sources",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFiniteGradient { .. } => "non_finite_gradient",
            Error::Diverged { .. } => "diverged",
            Error::WidthMismatch { .. } => "width_mismatch",
            Error::Format { .. } => "format",
            Error::Empty(_) => "empty",
            Error::MissingFile(_) => "missing_file",
            Error::Wav(_) => "wav",
            Error::Io(_) => "io",
        }
    }
}
