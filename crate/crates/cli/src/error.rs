use std::fmt;
use std::io;

use serde::Serialize;

/// A failed command: a stable machine-readable code, a message and the
/// process exit status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub exit: i32,
}

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    pub fn runtime(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_RUNTIME,
        }
    }

    pub fn io(path: &std::path::Path, err: io::Error) -> Self {
        let exit = if err.kind() == io::ErrorKind::NotFound {
            EXIT_USAGE
        } else {
            EXIT_RUNTIME
        };
        Self {
            code: "io",
            message: format!("{}: {err}", path.display()),
            exit,
        }
    }

    /// `{"error":{"code":…,"message":…}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pmkit::Error> for CliError {
    fn from(e: pmkit::Error) -> Self {
        use pmkit::Error::*;
        let message = e.to_string();
        match e {
            InvalidParameter { .. } => Self::usage("invalid_parameter", message),
            UnknownComponent(_) => Self::usage("unknown_unit", message),
            MissingCovariates(_) | InsufficientHistory { .. } => Self::usage("insufficient_covariates", message),
            InsufficientData(_) => Self::runtime("insufficient_data", message),
            NonConvergence(_) => Self::runtime("non_convergence", message),
            GridTooShort { .. } => Self::runtime("grid_too_short", message),
            InstanceTooLarge { .. } => Self::usage("instance_too_large", message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
