//! Library side of the `clot` command: configuration, CSV ingestion,
//! reports, and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

pub use commands::{cmd_audit, cmd_calibrate, cmd_simulate, cmd_test, exit};
pub use config::AuditConfig;
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, Ingested};
pub use report::{AuditReport, TestReport};
