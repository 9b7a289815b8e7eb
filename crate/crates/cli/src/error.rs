use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    ConfigError,
    PipelineError,
    IoError,
}

/// Error reported on stderr as one JSON object.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    /// Name of the underlying pipeline error, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::ConfigError,
            cause: None,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::IoError,
            cause: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::ConfigError => 2,
            ErrorKind::PipelineError => 3,
            ErrorKind::IoError => 4,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

impl From<bellsense::Error> for CliError {
    fn from(e: bellsense::Error) -> Self {
        let debug = format!("{e:?}");
        let name = debug
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or_default()
            .to_string();
        let kind = match e {
            bellsense::Error::InvalidParameter(_) | bellsense::Error::InvalidRate(_) => {
                ErrorKind::ConfigError
            }
            _ => ErrorKind::PipelineError,
        };
        Self {
            kind,
            cause: Some(name),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
