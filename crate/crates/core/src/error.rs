use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("alignment error: {what} has length {found}, expected {expected}")]
    Alignment {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domains do not share a point universe: {0}")]
    PointUniverse(String),

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),

    #[error("voter entry at (voter {voter}, point {point}) is {value}, expected -1 or +1")]
    InvalidVote {
        voter: usize,
        point: usize,
        value: i64,
    },

    #[error("invalid label {0}, expected -1 or +1")]
    InvalidLabel(i64),

    #[error("shared-support violation at atom ({point}, {label:+}): source mass {source_mass}, target mass {target_mass}")]
    SharedSupport {
        point: String,
        label: i8,
        source_mass: f64,
        target_mass: f64,
    },

    #[error("absolute-continuity violation: rho({index}) = {rho} but pi({index}) = 0")]
    AbsoluteContinuity { index: usize, rho: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample size mismatch: {0}")]
    SizeMismatch(String),

    #[error("posterior on the simplex boundary: weight {index} is {value}")]
    Boundary { index: usize, value: f64 },

    #[error("perturbation of magnitude {magnitude} destroys the support at atom {atom}")]
    SupportDestroyed { magnitude: f64, atom: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample file has no label column; labels are required here")]
    MissingLabels,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
