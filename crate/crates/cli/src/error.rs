use std::fmt;

use serde::Serialize;

/// Failure reported to the user: which stage failed and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub module: String,
    pub message: String,
}

impl CliError {
    pub fn new(module: impl Into<String>, message: impl Into<String>) -> Self {
        Self { module: module.into(), message: message.into() }
    }

    /// Errors of the command line layer itself.
    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("pipeline-cli", message)
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self::usage(format!("{}: {e}", path.display()))
    }

    /// `{"error":{"module":...,"message":...}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cellpeel_core::Error> for CliError {
    fn from(e: cellpeel_core::Error) -> Self {
        let message = match &e {
            cellpeel_core::Error::VolumeIo(x) => x.to_string(),
            cellpeel_core::Error::Masking(x) => x.to_string(),
            cellpeel_core::Error::Shells(x) => x.to_string(),
            cellpeel_core::Error::Peel(x) => x.to_string(),
            cellpeel_core::Error::Segment(x) => x.to_string(),
            cellpeel_core::Error::Tracking(x) => x.to_string(),
            cellpeel_core::Error::Quantify(x) => x.to_string(),
        };
        Self::new(e.module(), message)
    }
}

/// Lifts module errors into [`CliError`] with the module name attached.
pub trait OrCli<T> {
    fn cli(self) -> Result<T, CliError>;
}

impl<T, E: Into<cellpeel_core::Error>> OrCli<T> for Result<T, E> {
    fn cli(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::from(e.into()))
    }
}
