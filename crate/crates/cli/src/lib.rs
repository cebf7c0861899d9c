//! Experiment harness for the `channelcert` testers: config handling,
//! deterministic trial runner with CSV output, the lemma verification
//! sweep and sample-complexity curves.

pub mod config;
pub mod curve;
pub mod experiment;
pub mod lemmas;

pub use config::{ExperimentConfig, GroundTruth, Mode};
pub use experiment::{run, summarize, write_csv, RunOptions, TrialRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    Core(#[from] channelcert::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    /// One or more checks did not hold.
    #[error("{0}")]
    Assertion(String),
}

impl CliError {
    /// 1 for failed checks and runtime errors, 2 for bad configuration or input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Json(_) | CliError::Io(_) => 2,
            CliError::Core(_) | CliError::Csv(_) | CliError::Assertion(_) => 1,
        }
    }
}
