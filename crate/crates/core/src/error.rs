use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("outcome has zero probability ({0:e})")]
    ZeroProbability(f64),

    #[error("not a projection: idempotence residual {0:e}")]
    NotAProjection(f64),

    #[error("operator is not Hermitian: residual {0:e}")]
    NotHermitian(f64),

    #[error("slits {0} and {1} not pairwise orthogonal: residual {2:e}")]
    SlitsNotOrthogonal(usize, usize, f64),

    #[error("axis is not a unit vector: norm {0}")]
    NonUnitAxis(f64),

    #[error("degenerate eigendecomposition: {0}")]
    DegenerateSpectrum(String),

    #[error("operation not supported for this model: {0}")]
    UnsupportedModel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("probability table is missing entry {0}")]
    MissingEntry(String),

    #[error("invalid interference order {0}: must be between 2 and 9")]
    InvalidOrder(usize),

    #[error("invalid probability {value} for entry {key}")]
    InvalidProbability { key: String, value: f64 },

    #[error("design matrix rank {rank} below face rank {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("model inconsistency: probability {0:e} outside [0, 1] for setting {1}")]
    ModelInconsistency(f64, String),

    #[error("missing setting {0}")]
    MissingSetting(String),

    #[error("missing face estimate {0}")]
    MissingFace(String),

    #[error("slit system invalid: {0}")]
    InvalidSlitSystem(String),

    #[error("frequency table does not match plan: {0}")]
    FrequencyShape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
