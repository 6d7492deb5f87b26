//! Confidence intervals, verdict aggregation and report output.

mod ci;
mod pattern;
mod report;

use thiserror::Error;

pub use ci::{clopper_pearson, ConfidenceInterval};
pub use pattern::{classify_fix_pattern, FixPattern};
pub use report::{aggregate, FaultReport, Grouping, Report, ReportMeta, Tally, CI_LEVEL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unit and sys verdicts mixed in group `{0}`")]
    MixedMode(String),
}
