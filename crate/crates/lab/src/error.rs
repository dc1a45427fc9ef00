use thiserror::Error;

/// Failures of the harness, split by exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation failed: {0}")]
    Runtime(#[from] cxperceptron::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| LabError::Io { context, source }
    }
}
