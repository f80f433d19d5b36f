use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ForgeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("{path}: decode failed: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: unsupported bit depth ({color}); only 8-bit grayscale or RGB is accepted")]
    UnsupportedBitDepth { path: PathBuf, color: String },

    #[error("{path}: expected a single-channel mask, found {channels} channels")]
    NotSingleChannel { path: PathBuf, channels: u8 },

    #[error("{path}: encode failed: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },

    #[error("channel mismatch: {left} vs {right}")]
    ChannelMismatch { left: u8, right: u8 },

    #[error("invalid image buffer: {0}")]
    InvalidBuffer(String),

    #[error("no face region")]
    NoFaceRegion,

    #[error("no background region")]
    NoBackgroundRegion,

    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: u32,
        height: u32,
        window: usize,
    },

    #[error("embedding: {0}")]
    Embedding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("manifest {path}, line {line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("record {0:?} has no verdicts")]
    MissingVerdicts(String),

    #[error("empty manifest: no valid records")]
    EmptyManifest,

    #[error("pair {id}: {source}")]
    Pair {
        id: String,
        #[source]
        source: Box<ForgeError>,
    },
}

impl ForgeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ForgeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (u32, u32), right: (u32, u32)) -> Self {
        ForgeError::DimensionMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        }
    }

    /// Wraps the error with the id of the pair it occurred on.
    pub fn for_pair(self, id: &str) -> Self {
        ForgeError::Pair {
            id: id.to_owned(),
            source: Box::new(self),
        }
    }
}
