use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid gap series at index {index}: {reason}")]
    Validation { index: usize, reason: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("aliasing: {samples} samples cannot resolve frequency {freq} (need more than {required})")]
    Aliasing {
        samples: usize,
        freq: u64,
        required: u64,
    },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("witness undefined: {0}")]
    UndefinedWitness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
