use movwave::WaveError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Assertion,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Assertion => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

/// Error printed as JSON on stderr before exiting with [`ErrorKind::exit_code`].
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub code: u8,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, code: kind.exit_code(), message: message.into(), details: Vec::new() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn config_details(message: impl Into<String>, details: Vec<String>) -> Self {
        Self { details, ..Self::new(ErrorKind::Config, message) }
    }

    pub fn assertion(message: impl Into<String>, details: Vec<String>) -> Self {
        Self { details, ..Self::new(ErrorKind::Assertion, message) }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numeric, message)
    }

    pub fn io(e: std::io::Error, what: &str) -> Self {
        Self::config(format!("{what}: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<WaveError> for CliError {
    fn from(e: WaveError) -> Self {
        match e {
            WaveError::NonFinite(_) | WaveError::CrossFormula { .. } | WaveError::NoConvergence { .. } => {
                CliError::numeric(e.to_string())
            }
            _ => CliError::config(e.to_string()),
        }
    }
}
