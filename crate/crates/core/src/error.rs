use thiserror::Error;

/// A configuration value that violates its documented invariant.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: `{field}` {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Errors from driving the pipeline simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step called after the episode finished at step {0}")]
    EpisodeDone(u64),
    #[error("service index {index} out of range (pipeline has {count} services)")]
    NoSuchService { index: usize, count: usize },
}
