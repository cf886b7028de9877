//! Batch front-end: ingestion, configuration, run orchestration and reports.

pub mod audit;
pub mod config;
pub mod ingest;

pub use audit::{run, RunSummary, Verb};
pub use config::{EpsilonSpec, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for a failed stage or unwritable output, 4 for a
    /// violated invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Stage { .. } | CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        let stage = CliError::Stage {
            stage: "baseline".into(),
            message: String::new(),
        };
        assert_eq!(stage.exit_code(), 3);
        assert_eq!(CliError::Invariant(String::new()).exit_code(), 4);
    }
}
