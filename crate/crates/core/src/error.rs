use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto a stable exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("question triple {0} is not in the game's support")]
    NotInSupport(String),

    #[error("weights must be nonnegative and sum to 1 (got sum {0})")]
    BadWeights(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("no surviving trials: every trial contains a no-detection answer")]
    NoSurvivingTrials,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("qubit count {0} out of range 1..=16")]
    QubitRange(usize),

    #[error("unsupported game shape: {0}")]
    UnsupportedShape(String),

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
