use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported codec in {path}: {detail}")]
    UnsupportedCodec { path: PathBuf, detail: String },
    #[error("zero-length audio in {path}")]
    EmptyAudio { path: PathBuf },
    #[error("non-finite sample at index {index} in {source_id}")]
    NonFiniteSample { source_id: String, index: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("clip {source_id} shorter than one analysis window ({len} < {window})")]
    ClipTooShort {
        source_id: String,
        len: usize,
        window: usize,
    },
    #[error("no voiced frames in {source_id}")]
    NoVoicedFrames { source_id: String },
    #[error("k-means: {0}")]
    Clustering(String),
    #[error("mining: {0}")]
    Mining(String),
    #[error("segment span [{start_s}, {end_s}] out of bounds for {source_id} ({dur_s} s)")]
    SpanOutOfBounds {
        source_id: String,
        start_s: f64,
        end_s: f64,
        dur_s: f64,
    },
    #[error("features: {0}")]
    Features(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("model: {0}")]
    Model(String),
    #[error("training: {0}")]
    Training(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("pipeline stage {stage} failed on {source_id}: {detail}")]
    Stage {
        stage: String,
        source_id: String,
        detail: String,
    },
    #[error("bad file format in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
