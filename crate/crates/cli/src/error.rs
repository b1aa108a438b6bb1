use std::io;
use std::path::Path;

use serde_json::json;
use sqha_core::{Error, ErrorClass};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("{0}")]
    Parse(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "cli.IO",
            CliError::Parse(_) => "config.PARSE",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Core(e) => e.class(),
            _ => ErrorClass::Config,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Regime => 3,
            ErrorClass::Convergence => 4,
        }
    }

    /// The machine-readable form printed on standard error.
    pub fn to_json(&self) -> serde_json::Value {
        let class = match self.class() {
            ErrorClass::Config => "config",
            ErrorClass::Regime => "regime",
            ErrorClass::Convergence => "convergence",
        };
        json!({"error": {"code": self.code(), "class": class, "message": self.to_string()}})
    }
}
