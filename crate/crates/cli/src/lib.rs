//! Verification suite and profile export for the `nldirac` library.

pub mod config;
pub mod profile;
pub mod report;
pub mod suite;

pub use config::{BubbleConfig, SuiteConfig};
pub use profile::{emit_profile, write_csv, ProfileRow};
pub use report::{CheckRecord, Criterion, Report};
pub use suite::{run_families, run_suite, Family};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("nothing to verify")]
    NothingToVerify,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] nldirac::Error),
}

impl CliError {
    /// 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NothingToVerify | CliError::Config(_) | CliError::Library(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}
