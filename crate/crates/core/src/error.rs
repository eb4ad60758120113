use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability vector needs at least 2 components, got {len}")]
    Dimension { len: usize },

    #[error("{}not on the probability simplex: {detail}", row_prefix(*.row))]
    NotOnSimplex { row: Option<usize>, detail: String },

    #[error("operation requires labels but the prediction set has none")]
    MissingLabels,

    #[error("dimension mismatch: expected {expected} classes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("regression needs at least 2 calibration sets, got {got}")]
    InsufficientCalibration { got: usize },

    #[error("degenerate regression design: all calibration gaps are equal")]
    DegenerateDesign,

    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("metric value {0} outside [0, 1]")]
    MetricRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}parse error: {msg}", row_prefix(*.row))]
    Parse { row: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn row_prefix(row: Option<usize>) -> String {
    match row {
        Some(r) => format!("row {r}: "),
        None => String::new(),
    }
}

impl Error {
    /// Attach a data-row number to errors that carry one.
    pub fn at_row(self, row: usize) -> Self {
        match self {
            Error::NotOnSimplex { detail, .. } => Error::NotOnSimplex {
                row: Some(row),
                detail,
            },
            Error::Parse { msg, .. } => Error::Parse {
                row: Some(row),
                msg,
            },
            Error::Dimension { len } => Error::Parse {
                row: Some(row),
                msg: format!("expected at least 2 probability columns, got {len}"),
            },
            Error::LabelOutOfRange { label, k } => Error::Parse {
                row: Some(row),
                msg: format!("label {label} out of range for {k} classes"),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
