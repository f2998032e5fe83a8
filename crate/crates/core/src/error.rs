use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sector dimension {dim} exceeds the configured cap of {cap}")]
    Capacity { dim: u128, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("time {t} s lies outside the schedule span [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("schedule has a gap or overlap at {at} s")]
    ScheduleGap { at: f64 },

    #[error("postselection probability {probability:e} is below the degenerate-projection threshold")]
    DegenerateProjection { probability: f64 },

    #[error("states belong to different bipartite sectors")]
    IndexerMismatch,

    #[error("scan grid does not bracket the half maximum on the {side} side")]
    NoCrossing { side: &'static str },

    #[error("trajectory does not cover [{need_start}, {need_end}] s")]
    Coverage { need_start: f64, need_end: f64 },

    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
