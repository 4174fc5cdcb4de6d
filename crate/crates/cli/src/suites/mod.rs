//! Suite runners. Each turns module results into [`Record`]s; a computation
//! that errors becomes a failed record rather than aborting the run.

mod algebra;
mod ks;
mod limits;
mod radial;
mod spectrum;

pub use algebra::{algebra_ladder_study, casimir_records, LadderRow, LadderStudy};

use crate::config::{RunConfig, Suite};
use crate::report::{Record, Report};

pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Vec<Record> {
    match suite {
        Suite::Spectrum => spectrum::run(cfg),
        Suite::Algebra => algebra::run(cfg),
        Suite::Radial => radial::run(cfg),
        Suite::Ks => ks::run(cfg),
        Suite::Limits => limits::run(cfg),
    }
}

/// Runs the selected suites in declaration order and assembles the report.
///
/// Suites run one after another: the grid suites are memory bound, and the
/// order of records must not depend on scheduling.
pub fn run(cfg: &RunConfig) -> Report {
    let records = cfg.suites.iter().flat_map(|&s| run_suite(cfg, s)).collect();
    Report::new(
        cfg.suites.iter().map(|s| s.name().to_owned()).collect(),
        cfg.seed,
        cfg.echo.clone(),
        records,
    )
}

/// Pass/fail flag from a boolean property, as a record value.
fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
