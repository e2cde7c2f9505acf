use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate region")]
    DegenerateRegion,
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),
    #[error("continuum emulation required")]
    ContinuumRequired,
    #[error("window is zero")]
    ZeroWindow,
    #[error("a window is required for the {0} class")]
    MissingWindow(&'static str),
    #[error("signal is zero")]
    ZeroSignal,
    #[error("grid too small to emulate escape: {0}")]
    GridTooSmall(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        !matches!(self, LabError::Numerical(_) | LabError::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
