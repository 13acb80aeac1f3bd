//! Summary statistics and hypothesis tests over per-case metric values.

mod bootstrap;
mod correlation;
mod holm;
mod noninferiority;
mod wilcoxon;

pub use bootstrap::{bootstrap_median_ci, derive_seed, BootstrapSummary, DEFAULT_RESAMPLES};
pub use correlation::spearman_rho;
pub use holm::holm_adjust;
pub use noninferiority::{
    adjust_family, noninferiority_test, Direction, MetricMeta, MetricRange, NonInferiorityMargin,
    NonInferiorityOutcome, DEFAULT_ALPHA, ZERO_DIFFERENCE_RTOL,
};
pub use wilcoxon::{
    exact_conditional_upper_tail, exact_upper_tail, normal_upper_tail, signed_rank_counts, wilcoxon_one_sided, PValueMethod, SignedRankTest,
    EXACT_MAX_N,
};
