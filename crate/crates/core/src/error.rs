use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The metric projection is not single-valued at the query point.
    #[error("non-unique projection onto {stratum}: {detail}")]
    NonUniqueProjection { stratum: String, detail: String },

    /// The query point lies outside the domain of an operation
    /// (off-manifold, on the frontier, or where a projection is not attained).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("tube construction failed on stratum {stratum}: condition \"{condition}\" still violated after {halvings} halvings")]
    TubeConstruction {
        stratum: String,
        condition: String,
        halvings: usize,
    },

    #[error("certification '{condition}' failed (max violation {max_violation:e})")]
    Certification {
        condition: String,
        max_violation: f64,
    },

    #[error("pipeline aborted at stage {stage}: {reason}")]
    PipelineAbort { stage: String, reason: String },

    #[error("refused: {0}")]
    Refused(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
