use thiserror::Error;

/// Coarse failure category, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller broke an API or usage contract.
    Usage,
    /// Input data is malformed or inconsistent.
    Data,
    /// A numerical procedure could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(
        "degenerate covariance: Cholesky failed after jitter escalation (final jitter {jitter:e})"
    )]
    DegenerateCovariance { jitter: f64 },

    #[error("insufficient degrees of freedom: n = {n} must exceed rank(H) = {rank}")]
    InsufficientDof { n: usize, rank: usize },

    #[error("non-identifiable parameters: H has a null space of dimension {null_dim}")]
    NonIdentifiable { null_dim: usize },

    #[error("prior covariance is not positive definite")]
    PriorNotPositiveDefinite,

    #[error("no prior attached to the model")]
    MissingPrior,

    #[error("calibration regime {calib:?} does not match the model (prior present: {has_prior})")]
    RegimeMismatch {
        calib: crate::infer::Regime,
        has_prior: bool,
    },

    #[error("model output is not finite at design point {point} ({})", match param { Some(j) => format!("parameter {j} shifted"), None => "nominal run".to_string() })]
    NonFiniteModelOutput { point: usize, param: Option<usize> },

    #[error("negative predictive variance {variance:e} (threshold {threshold:e})")]
    NegativeVariance { variance: f64, threshold: f64 },

    #[error("hyper-parameter estimation failed: all {n_starts} starts produced invalid objective values")]
    EstimationFailed {
        n_starts: usize,
        trace: Vec<crate::reml::StartTrace>,
    },

    #[error("fold {fold}: training set has {n_train} points but rank(H) = {rank}")]
    FoldTooSmall {
        fold: usize,
        n_train: usize,
        rank: usize,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::MissingPrior
            | Error::RegimeMismatch { .. }
            | Error::Config(_) => ErrorKind::Usage,
            Error::Data(_) | Error::Io { .. } | Error::FoldTooSmall { .. } => ErrorKind::Data,
            Error::InsufficientDof { .. } => ErrorKind::Data,
            Error::DegenerateCovariance { .. }
            | Error::NonIdentifiable { .. }
            | Error::PriorNotPositiveDefinite
            | Error::NonFiniteModelOutput { .. }
            | Error::NegativeVariance { .. }
            | Error::EstimationFailed { .. } => ErrorKind::Numerical,
            Error::Fold { source, .. } | Error::Context { source, .. } => source.kind(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
