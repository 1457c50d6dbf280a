use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cap exceeded: {what} = {value} > {cap}")]
    CapExceeded {
        what: &'static str,
        value: u64,
        cap: u64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("size mismatch: expected {expected} samples, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("edge not found in forest: {0}")]
    EdgeNotFound(String),
    #[error("root edge of tree {0} is trivial")]
    TrivialRoot(usize),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("solver blow-up at t = {time}: norm grew by factor {factor:.3}")]
    BlowUp { time: f64, factor: f64 },
    #[error("stability violation: {0}")]
    Stability(String),
    #[error("dealiasing must be enabled for oracle runs")]
    DealiasingRequired,
    #[error("Picard iteration is not contracting (ratio {ratio:.3} after {sweeps} sweeps)")]
    NonContraction { ratio: f64, sweeps: usize },
    #[error("outside the small-time regime: order-1/order-0 ratio {ratio:.3} exceeds {limit}")]
    SmallTimeRegime { ratio: f64, limit: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("trajectory does not cover requested time {0}")]
    MissingTrajectory(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
