use thiserror::Error;
use uom_core::UomError;

/// Problems with the input file, reported before any solve starts.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn field_name(&self) -> Option<&str> {
        match self {
            ConfigError::Field { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("scenario {scenario}: {source}")]
    Solver { scenario: &'static str, source: UomError },

    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver { .. } => "solver",
            CliError::Output { .. } => "output",
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> serde_json::Value {
        let mut v = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config(c) => {
                if let Some(f) = c.field_name() {
                    v["field"] = f.into();
                }
            }
            CliError::Solver { scenario, .. } => v["scenario"] = (*scenario).into(),
            CliError::Output { path, .. } => v["path"] = path.clone().into(),
        }
        v
    }
}
