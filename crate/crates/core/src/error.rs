use thiserror::Error;

/// Errors raised by the geometry, spectral and flow routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported geometry: only round shrinkers with n = 1 or n = 2 are available (got n = {n})")]
    UnsupportedGeometry { n: usize },

    #[error("degenerate graph: radius {radius} at node {node}")]
    DegenerateGraph { node: usize, radius: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("insufficient spectrum: {0}")]
    InsufficientSpectrum(String),

    #[error("range error: mode {mode} (eigenvalue {eigenvalue}) overflows at s = {s}")]
    Range {
        mode: usize,
        eigenvalue: f64,
        s: f64,
    },

    #[error("zero mode vector")]
    ZeroVector,

    #[error("out of contract: {0}")]
    OutOfContract(String),

    #[error("step rejected {attempts} times at tau = {tau}")]
    Stiffness { tau: f64, attempts: usize },

    #[error("decay order undefined at tau = {tau}: {reason}")]
    UndefinedOrder { tau: f64, reason: String },

    #[error("too few samples: need {needed}, have {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("window [{start}, {end}] exceeds trajectory span [{span_start}, {span_end}]")]
    WindowOutOfSpan {
        start: f64,
        end: f64,
        span_start: f64,
        span_end: f64,
    },

    #[error("infinite distance inside window at tau = {0}")]
    InfiniteDistance(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
