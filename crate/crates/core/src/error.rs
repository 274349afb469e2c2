use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ticks_per_unit must be at least 1")]
    ZeroScale,

    #[error("duration {0} is not an integer number of ticks under this scale")]
    NonRepresentable(String),

    #[error("time subtraction underflow: {later} ticks subtracted from {earlier} ticks")]
    TimeUnderflow { earlier: u64, later: u64 },

    #[error("binning horizon {needed} ticks exceeds trace horizon {available} ticks")]
    HorizonExceeded { needed: u64, available: u64 },

    #[error("need at least {needed} clock periods, got {got}")]
    TooFewPeriods { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("system is unstable: {0}")]
    Unstable(String),

    #[error("probe {index}: reconstructed count is negative")]
    CaseUnderflow { index: usize },

    #[error("probe {index}: observation is inconsistent with the FCFS probe pattern ({reason})")]
    InconsistentObservation { index: usize, reason: String },

    #[error("alignment violated: {0}")]
    Alignment(String),

    #[error("estimates and truth are misaligned: {0}")]
    Misaligned(String),

    #[error("no completed jobs left after trimming and censoring")]
    NoJobs,

    #[error("io error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
