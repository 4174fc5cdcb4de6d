//! Configuration, suite execution and reporting for the `spin-so4` runner.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{ConfigBuilder, ConfigError, Format, RunConfig, Suite};
pub use report::{EmitError, Record, Relation, Report};
pub use suites::{algebra_ladder_study, casimir_records, run, run_suite};

/// Process exit statuses.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const ERROR: u8 = 2;
}
