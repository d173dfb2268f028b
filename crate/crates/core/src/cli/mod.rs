//! Command-line front end: configuration, runs and reports.

pub mod config;
pub mod run;

pub use config::{parse_config, Format, RunConfig};
pub use run::{list_scenarios, run, verify, RunSummary};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Process exit status for an error: usage and configuration problems map
/// to 2, everything else to 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::UnknownScenario(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}
