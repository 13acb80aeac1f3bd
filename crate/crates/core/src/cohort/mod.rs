//! Study orchestration: manifests, cohort splits, multi-rater agreement
//! tables, non-inferiority reports and volume scatter exports.

mod manifest;
mod report;
mod scatter;
mod split;
mod study;

pub use manifest::{CaseEntry, Manifest, Roles};
pub use report::{
    format_p, metric_label, noninferiority_report, ExpertBlock, MetricRow, Report, ReportCsvRow, ReportOptions,
};
pub use scatter::{export_volume_scatter, write_scatter, ScatterPoint, ScatterSeries};
pub use split::{numbered_ids, split_cohort, SplitPlan, DEFAULT_COHORT_SIZE, DEFAULT_FOLDS, DEFAULT_TEST_SIZE};
pub use study::{default_pairs, run_agreement_study, AgreementRow, AgreementTable, Exclusion, RaterPair, EXCLUDED_PREFIX};
