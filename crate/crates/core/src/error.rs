use std::path::PathBuf;

use thiserror::Error;

use crate::features::FeatureKind;
use crate::trials::Category;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // audio
    #[error("malformed RIFF/WAVE data: {0}")]
    MalformedRiff(String),
    #[error("unsupported WAVE encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("data chunk truncated: declared {declared} bytes, {available} available")]
    TruncatedData { declared: usize, available: usize },
    #[error("invalid audio buffer: {0}")]
    InvalidAudio(String),

    // signal analysis
    #[error("input too short: need at least {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("contour has no voiced frames")]
    EmptyAfterTrim,
    #[error("no voiced region found")]
    NoVoicedRegion,
    #[error("need at least 2 cycles, got {0}")]
    TooFewCycles(usize),
    #[error("mean cycle amplitude is zero")]
    ZeroAmplitude,
    #[error("contour has {got} frames, buffer implies {expected}")]
    AlignmentMismatch { expected: usize, got: usize },
    #[error("sequence too short for a spectrum: need at least 2 values, got {0}")]
    SequenceTooShort(usize),
    #[error("power spectral density is identically zero")]
    AllZeroPsd,

    // features
    #[error("feature kind {kind} cannot have {dims} dims")]
    KindDimsMismatch { kind: FeatureKind, dims: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidFeature(String),
    #[error("bad magic in {0}")]
    BadMagic(String),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("missing feature file {0}")]
    MissingFeatureFile(PathBuf),

    // classifier
    #[error("bad layer dims: {0}")]
    BadDims(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(usize),
    #[error("malformed model file: {0}")]
    BadModel(String),

    // metrics
    #[error("score set needs at least one positive and one negative trial{0}")]
    DegenerateLabels(String),
    #[error("ill-posed cost model: {0}")]
    IllPosedCostModel(String),

    // manifests, trials, text formats
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate utt_id {0}")]
    DuplicateUttId(String),
    #[error("line {line}: impersonation row {utt_id} needs mimicked_target_id (and only impersonation rows may carry one)")]
    MissingMimickedTarget { line: usize, utt_id: String },
    #[error("category {0} has no qualifying pairs")]
    EmptyCategory(Category),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("no embedding for utterance {0}")]
    MissingEmbedding(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
