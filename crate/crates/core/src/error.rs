use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by flow estimation, file formats, and configuration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration field is out of its valid domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Inputs violate a precondition (dimensions, empty masks, bad values).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Allocating the large solver buffers would exceed the configured cap.
    #[error("memory budget exceeded: {required} bytes required, cap is {cap} bytes")]
    MemoryBudget { required: u64, cap: u64 },

    /// A min-convolution kernel that requires convexity was given a
    /// non-convex penalty.
    #[error("penalty function is not convex on the requested domain")]
    NonConvexPenalty,

    /// No valid pixels remain, so interpolation has nothing to extend.
    #[error("flow field has no valid pixels to interpolate from")]
    NoValidPixels,

    /// A `.flo` stream does not start with the magic bytes.
    #[error("bad .flo magic bytes {found:02x?}")]
    FloBadMagic { found: [u8; 4] },

    /// A `.flo` stream ended before the declared payload.
    #[error(".flo payload truncated: expected {expected} bytes, got {got}")]
    FloTruncated { expected: u64, got: u64 },

    /// A `.flo` header declares impossible dimensions.
    #[error(".flo dimensions invalid: {width} x {height}")]
    FloDimensions { width: i32, height: i32 },

    /// An image stream is not one of the supported formats.
    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    /// An image stream is recognized but malformed.
    #[error("corrupt image stream: {0}")]
    CorruptImage(String),

    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
