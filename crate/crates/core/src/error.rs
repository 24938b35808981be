use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented invariant of one of the domain types.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("no bright soliton: beta2 = {beta2:e} s^2/m is not anomalous")]
    NoBrightSoliton { beta2: f64 },

    #[error("time grid too coarse: dt = {dt:e} s exceeds fwhm/16 = {limit:e} s")]
    GridTooCoarse { dt: f64, limit: f64 },

    #[error("time window too small: {window:e} s < required {required:e} s")]
    WindowTooSmall { window: f64, required: f64 },

    #[error("field escaped the time window (centroid {centroid:e} s, window {window:e} s)")]
    FieldEscapesWindow { centroid: f64, window: f64 },

    #[error("non-finite field value encountered")]
    NonFinite,

    #[error("Jones matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("degenerate mean field: {0}")]
    DegenerateMeanField(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("covariance is not symmetric positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical integration itself, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::FieldEscapesWindow { .. }
            | Error::NonFinite
            | Error::NotPositiveSemidefinite
            | Error::DegenerateEnsemble(_)
            | Error::DegenerateMeanField(_) => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
