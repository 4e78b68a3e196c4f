use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("non-spacelike sample at node {node:?}: margin {margin:e} <= floor {floor:e}")]
    NonSpacelike {
        node: Option<usize>,
        margin: f64,
        floor: f64,
    },

    #[error("induced metric is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularMetric { condition: f64 },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("time {t} is below the cutoff threshold {t_min}")]
    BelowThreshold { t: f64, t_min: f64 },

    #[error("point {point:?} lies outside the grid hull")]
    OutOfDomain { point: Vec<f64> },

    #[error("grid resolution {resolution} is below the minimum of {minimum}")]
    ResolutionTooLow { resolution: usize, minimum: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("error {0:e} is below the floor; refinement order is meaningless")]
    DegenerateError(f64),

    #[error("blowup: |u| = {value:e} exceeds cap {cap:e} at node {node}")]
    Blowup { value: f64, cap: f64, node: usize },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("operation unsupported for this grid: {0}")]
    ModeUnsupported(String),

    #[error("trajectory span too short: need s in [{needed_lo}, {needed_hi}], have [{have_lo}, {have_hi}]")]
    SpanTooShort {
        needed_lo: f64,
        needed_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("rescaled box leaves the grid for lambda = {lambda}")]
    RescaleOutOfDomain { lambda: f64 },

    #[error("parse error{}: {message}", location(.line, .key))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("snapshot version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("io error: {0}")]
    Io(String),
}

fn location(line: &Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l} (key `{k}`)"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" (key `{k}`)"),
        (None, None) => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
