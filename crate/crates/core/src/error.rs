use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config serialization error: {0}")]
    Serialize(String),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] crate::workload::WorkloadError),
    #[error(transparent)]
    Fluid(#[from] crate::fluid::FluidError),
    #[error("event budget of {budget} exhausted at t={at_ns} ns")]
    EventBudget { budget: u64, at_ns: u64 },
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Workload(_) | RunError::Fluid(_) => 2,
            RunError::EventBudget { .. } => 3,
            RunError::Io(_) | RunError::Csv(_) | RunError::Json(_) => 4,
        }
    }
}
