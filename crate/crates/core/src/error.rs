use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants map onto the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty operand")]
    EmptyOperand,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no speech activity")]
    NoSpeechActivity,
    #[error("silent input")]
    Silence,

    #[error("unsupported channel count: {0}")]
    UnsupportedChannels(u16),
    #[error("unsupported sample format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed wav: {0}")]
    MalformedWav(String),

    #[error("insufficient excitation")]
    InsufficientExcitation,
    #[error("step size too large")]
    StepSizeTooLarge,
    #[error("invalid frequency ordering: {0} Hz .. {1} Hz")]
    InvalidFrequencies(f64, f64),
    #[error("ir length {requested} exceeds deconvolved support {available}")]
    IrTooLong { requested: usize, available: usize },

    #[error("insufficient bank material: {0}")]
    InsufficientMaterial(String),
    #[error("missing transfer function: {0}")]
    MissingTransferFunction(String),
    #[error("degenerate spectrum")]
    DegenerateSpectrum,
    #[error("missing asset: {0}")]
    MissingAsset(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,
    #[error("label {0} out of range")]
    LabelOutOfRange(usize),
    #[error("divergence detected")]
    Divergence,
    #[error("non-integer channel width for tau={0}")]
    NonIntegerWidth(f64),

    #[error("insufficient seeds: need at least 2, got {0}")]
    InsufficientSeeds(usize),
    #[error("timing resolution insufficient")]
    TimingResolution,
    #[error("class coverage: {0}")]
    ClassCoverage(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 config error, 3 data error, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::NonIntegerWidth(_) => 2,
            Error::Divergence | Error::StepSizeTooLarge => 4,
            _ => 3,
        }
    }
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => Error::Io(io),
            other => Error::MalformedWav(other.to_string()),
        }
    }
}
