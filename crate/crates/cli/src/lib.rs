//! Batch front end: argument parsing, the saved run configuration, and
//! the commands themselves.

pub mod commands;
pub mod config;

pub use commands::{run, Check, Outcome};
pub use config::{Cli, RunConfig, Task};

/// Exit status for a finished run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Consistency failures inside the library are certificate failures;
/// everything else is a usage or input problem.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<liplab::Error>() {
        Some(liplab::Error::Consistency(_)) | Some(liplab::Error::NotCovered(_)) => EXIT_CERTIFICATE,
        _ => EXIT_CONFIG,
    }
}
