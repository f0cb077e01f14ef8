use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("k = {k} out of range for a sample of {n} finite values (need 1 <= k <= n - 1)")]
    KOutOfRange { k: usize, n: usize },

    #[error("threshold {0} is not positive; log-ratio estimators need a positive threshold")]
    NonPositiveThreshold(f64),

    #[error("degenerate sample: top order statistics carry no spread above the threshold")]
    DegenerateSample,

    #[error("at grid point t = {t}: {source}")]
    AtGridPoint {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("value {x} lies on the support boundary at t = {t} (survival probability is zero)")]
    SupportBoundary { t: f64, x: f64 },

    #[error("covariance factorization failed even with diagonal jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("model: {0}")]
    Model(String),

    #[error("replicate {replicate} at n = {n}: {source}")]
    Replicate {
        n: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn at_point(self, t: f64) -> Self {
        Error::AtGridPoint {
            t,
            source: Box::new(self),
        }
    }

    /// The innermost error, with grid-point and replicate context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridPoint { source, .. } | Error::Replicate { source, .. } => source.root(),
            other => other,
        }
    }
}
