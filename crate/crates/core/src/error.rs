use std::io;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("file contains zero points")]
    NoPoints,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid label `{token}` on line {line}")]
    InvalidLabel { line: usize, token: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("prerequisite missing: {0}")]
    Prerequisite(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_) | Error::Prerequisite(_) => ErrorCategory::Config,
            Error::Numeric(_) => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::EmptyInput(_) => "empty_input",
            Error::MissingColumn(_) => "missing_column",
            Error::MissingField(_) => "missing_field",
            Error::MalformedHeader(_) => "malformed_header",
            Error::NoPoints => "no_points",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::LengthMismatch(_) => "length_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidLabel { .. } => "invalid_label",
            Error::Degenerate(_) => "degenerate",
            Error::Numeric(_) => "numeric",
            Error::Prerequisite(_) => "prerequisite",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
