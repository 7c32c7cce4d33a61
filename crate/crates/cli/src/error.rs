use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config{}: {message}", key.as_ref().map(|k| format!(" key `{k}`")).unwrap_or_default())]
    Config { key: Option<String>, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Compute(#[from] stirap_core::Error),
    #[error("{0}")]
    Usage(String),
}

/// Machine-readable failure record written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub kind: &'static str,
    pub key: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn invalid(key: &str, message: &str) -> Self {
        CliError::Config { key: Some(key.to_string()), message: message.to_string() }
    }

    pub fn from_toml(err: toml::de::Error) -> Self {
        let message = err.message().to_string();
        // serde names the offending field in backticks.
        let key = message.split('`').nth(1).map(str::to_string);
        CliError::Config { key, message: err.to_string() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Compute(_) => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, key) = match self {
            CliError::Config { key, .. } => ("config", key.clone()),
            CliError::Io { .. } => ("io", None),
            CliError::Compute(_) => ("compute", None),
            CliError::Usage(_) => ("usage", None),
        };
        ErrorRecord { status: "error", kind, key, message: self.to_string() }
    }
}

macro_rules! compute_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.into())
            }
        })*
    };
}

compute_from!(
    stirap_core::GateError,
    stirap_core::SweepError,
    stirap_core::TomographyError,
    stirap_core::DeviceError,
    stirap_core::PropagatorError,
    stirap_core::ModelError
);
