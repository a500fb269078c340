use std::path::PathBuf;

/// Errors produced anywhere in the tokenization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    UnwritableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is locked by another run (remove the .lock file if stale)")]
    OutputLocked(PathBuf),
    #[error("row {row}: expected {expected} columns, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: cannot parse {text:?} as a number")]
    InvalidNumber {
        row: usize,
        column: usize,
        text: String,
    },
    #[error("row {row}, column {column}: sample is not finite")]
    NonFiniteSample { row: usize, column: usize },
    #[error("recording contains no samples")]
    EmptyRecording,
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("raw file holds {values} values, not divisible by {channels} channels")]
    ChannelCountMismatch { values: usize, channels: usize },

    #[error("invalid band {low_hz}-{high_hz} Hz at sample rate {sample_rate_hz} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sample_rate_hz: f64,
    },
    #[error("recording has {samples} samples, filtering needs more than {required}")]
    RecordingTooShort { samples: usize, required: usize },
    #[error("recording has {samples} samples, shorter than one {window}-sample window")]
    RecordingShorterThanWindow { samples: usize, window: usize },
    #[error("channel {0} does not exist")]
    NoSuchChannel(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("segment has {len} samples, at least {required} required")]
    SegmentTooShort { len: usize, required: usize },
    #[error("at least {required} feature vectors required, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("feature vector {index} is not finite")]
    NonFiniteFeature { index: usize },

    #[error("need at least {k} distinct feature vectors for K = {k}, got {got}")]
    TooFewSamples { k: usize, got: usize },
    #[error("codebook was built with different pipeline settings: {0}")]
    ConfigMismatch(String),
    #[error("unsupported codebook format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("corrupt codebook: {0}")]
    CorruptCodebook(String),

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("label {label} is outside [0, {k})")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("reference labels are required for PNMI")]
    MissingReference,
    #[error("token sequences come from different codebooks")]
    CodebookMismatch,
    #[error("channel layouts differ: {0}")]
    ChannelMismatch(String),

    #[error("invalid activation profile: {0}")]
    InvalidProfile(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("{0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnreadableFile { .. } => "UnreadableFile",
            Error::UnwritableFile { .. } => "UnwritableFile",
            Error::OutputLocked(_) => "OutputLocked",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::InvalidNumber { .. } => "InvalidNumber",
            Error::NonFiniteSample { .. } => "NonFiniteSample",
            Error::EmptyRecording => "EmptyRecording",
            Error::InvalidRecording(_) => "InvalidRecording",
            Error::ChannelCountMismatch { .. } => "ChannelCountMismatch",
            Error::InvalidBand { .. } => "InvalidBand",
            Error::RecordingTooShort { .. } => "RecordingTooShort",
            Error::RecordingShorterThanWindow { .. } => "RecordingShorterThanWindow",
            Error::NoSuchChannel(_) => "NoSuchChannel",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SegmentTooShort { .. } => "SegmentTooShort",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NonFiniteFeature { .. } => "NonFiniteFeature",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::ConfigMismatch(_) => "ConfigMismatch",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::CorruptCodebook(_) => "CorruptCodebook",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptySequence => "EmptySequence",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::MissingReference => "MissingReference",
            Error::CodebookMismatch => "CodebookMismatch",
            Error::ChannelMismatch(_) => "ChannelMismatch",
            Error::InvalidProfile(_) => "InvalidProfile",
            Error::InvalidManifest(_) => "InvalidManifest",
            Error::Parse(_) => "Parse",
        }
    }
}

pub(crate) fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}
