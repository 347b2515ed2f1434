//! Library half of the `ea` binary: flag/config resolution, command
//! execution, and output-record serialization. Kept as a library so
//! integration tests can exercise the record schema and parsers directly.

use thiserror::Error;

pub mod commands;
pub mod grid;
pub mod opts;
pub mod output;

/// CLI-level failure, carrying the process exit code.
///
/// `Param` covers everything the caller can fix (bad flag values, config
/// problems, unusable files) and exits 2; `Numeric` covers computations that
/// could not reach their tolerance and exits 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Param(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ea_core::Error> for CliError {
    fn from(err: ea_core::Error) -> Self {
        match err {
            ea_core::Error::InvalidParameter(_) | ea_core::Error::UnsupportedConfiguration(_) => {
                CliError::Param(err.to_string())
            }
            ea_core::Error::Numeric { .. } => CliError::Numeric(err.to_string()),
        }
    }
}

pub(crate) fn param(msg: impl Into<String>) -> CliError {
    CliError::Param(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_error_classes() {
        assert_eq!(param("x").exit_code(), 2);
        assert_eq!(
            CliError::from(ea_core::Error::InvalidParameter("p".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(ea_core::Error::UnsupportedConfiguration("c".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(ea_core::Error::numeric("root", "no bracket")).exit_code(),
            3
        );
    }
}
