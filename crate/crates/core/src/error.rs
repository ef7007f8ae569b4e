use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x}, {y}, {w}, {h}): width and height must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("score {0} is outside [0, 1]")]
    InvalidScore(f64),

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("image {image_id}: missing required {pass} pass")]
    MissingPass { image_id: u64, pass: String },

    #[error("image {image_id}: early-head pass has no flip detections (TTA is required on the early-exit path)")]
    MissingFlip { image_id: u64 },

    #[error("empty trace set")]
    EmptyTraceSet,

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("unknown image id {0}")]
    UnknownImage(u64),

    #[error("dataset too small: need {required} images, have {available}")]
    DatasetTooSmall { required: usize, available: usize },

    #[error("not enough images per category: need {required} of each, have {simple} simple and {complex} complex")]
    InsufficientCategory {
        required: usize,
        simple: usize,
        complex: usize,
    },

    #[error("degenerate zero total time")]
    DegenerateZeroTime,

    #[error("baseline {0} must be positive")]
    ZeroBaseline(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported trace format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("duplicate image id {0} in trace file")]
    DuplicateImage(u64),

    #[error("annotation references unknown image {0}")]
    UnknownAnnotationImage(u64),

    #[error("report section {0} is not present")]
    MissingSection(&'static str),

    #[error("cannot plot sweep: {0}")]
    InvalidPlot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
