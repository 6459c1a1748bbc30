use herman_core::Error;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Core(Error::data(msg))
    }

    /// 2 for configuration, 3 for data, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(Error::Config(_)) => 2,
            CliError::Core(Error::Numeric(_)) => 4,
            CliError::Core(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            4 => "numeric",
            _ => "data",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json_line(&self) -> String {
        let mut obj = json!({ "error": self.kind(), "code": self.exit_code(), "message": self.to_string() });
        if let CliError::Core(Error::Line { line, .. }) = self {
            obj["line"] = json!(line);
        }
        obj.to_string()
    }
}
