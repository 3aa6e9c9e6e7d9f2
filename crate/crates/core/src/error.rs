use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error("could not parse length `{0}`")]
    ParseLength(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("graph is disconnected: vertex `{0}` is unreachable from `{1}`")]
    Disconnected(String, String),

    #[error("visual parameter rejected: exp(epsilon * delta) = {lhs} exceeds sqrt(2) (epsilon = {epsilon}, delta = {delta})")]
    NotAdmissible { epsilon: f64, delta: String, lhs: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arithmetic overflow while scaling exact lengths")]
    Overflow,

    #[error("cover bound violated: {what} = {value} exceeds {bound} at witness `{witness}`")]
    CoverBound {
        what: &'static str,
        witness: String,
        value: usize,
        bound: usize,
    },

    #[error("stage {stage}: {reason}")]
    Stage { stage: usize, reason: String },

    #[error("attaching ray to `{target}` failed: {reason}")]
    Attach { target: String, reason: String },

    #[error("cycle in connection references at `{0}`")]
    ConnectionCycle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that signal an underestimated doubling count.
    pub fn is_bound_violation(&self) -> bool {
        matches!(self, Error::CoverBound { .. })
    }
}
