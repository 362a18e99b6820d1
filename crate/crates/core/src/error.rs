use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by the numerical core.
///
/// Each variant maps to one error class of the command line so that the
/// companion crate can print a machine-parsable tag.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient history: need {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("integration failure at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },
}

impl Error {
    /// Short stable tag for the error class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidData(_) => "invalid-data",
            Error::Domain(_) => "domain",
            Error::SingularDesign(_) => "singular-design",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::InsufficientHistory { .. } => "insufficient-history",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Numeric(_) => "numeric",
            Error::FitFailure(_) => "fit-failure",
            Error::IntegrationFailure { .. } => "integration-failure",
        }
    }
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
