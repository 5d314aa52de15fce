//! Monte-Carlo benchmark harness for the `varsel` selection methods.

pub mod config;
pub mod records;
pub mod render;
pub mod runner;

pub use config::{Config, ConfigError, StudyConfig};
pub use records::{RunRecord, SummaryRow};
pub use runner::{run_in_memory, run_to_dir, RunOutcome};
