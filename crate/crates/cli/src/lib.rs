//! Command-line driver and benchmark harness for the completion join:
//! experiment configs, algorithm dispatch, cross-algorithm verification,
//! and report emission.

pub mod bench;
pub mod config;
pub mod output;
pub mod run;

pub use bench::{run_experiment, BenchRecord, BenchReport};
pub use config::{DataSource, ExperimentConfig};
pub use run::Algorithm;

/// Process exit codes: 0 success, 1 usage, 2 data error, 3 verification
/// failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Verification { summary: String, diffs: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "{msg}"),
            CliError::Verification { summary, diffs } => {
                writeln!(f, "verification failed: {summary}")?;
                for d in diffs {
                    writeln!(f, "  {d}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<kgcjoin_core::Error> for CliError {
    fn from(e: kgcjoin_core::Error) -> Self {
        match e {
            kgcjoin_core::Error::Parameter(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}
