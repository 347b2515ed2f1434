use thiserror::Error;

/// Errors surfaced by the accountant library.
///
/// The split matters to callers: parameter and configuration problems are
/// caller mistakes (the CLI maps them to exit code 2), while numeric failures
/// mean a computation could not reach its tolerance (exit code 3).
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The combination of inputs is valid individually but unsupported
    /// together (e.g. an inverse PLLR branch for a symmetric mechanism,
    /// or a refined bound requested for a heterogeneous composition).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A numeric routine failed to converge or produced a non-finite value.
    /// `context` names the failing sub-computation so test logs and CLI
    /// diagnostics can point at it directly.
    #[error("numeric failure in {context}: {message}")]
    Numeric { context: &'static str, message: String },
}

impl Error {
    pub fn numeric(context: &'static str, message: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
