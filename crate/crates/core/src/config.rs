//! Run-level defaults shared by the command-line tool.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cohort::{ReportOptions, Roles, DEFAULT_COHORT_SIZE, DEFAULT_FOLDS, DEFAULT_TEST_SIZE};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_TOLERANCE_MM;
use crate::stats::{NonInferiorityMargin, DEFAULT_ALPHA, DEFAULT_RESAMPLES};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COREVAL_OUT";
pub const DEFAULT_OUT_DIR: &str = "coreval-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub cohort_size: usize,
    pub n_test: usize,
    pub k_folds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            cohort_size: DEFAULT_COHORT_SIZE,
            n_test: DEFAULT_TEST_SIZE,
            k_folds: DEFAULT_FOLDS,
        }
    }
}

/// Parameters of one evaluation run. There is no `Default`: the seed must
/// always be chosen explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tolerance_mm: f64,
    pub margins: NonInferiorityMargin,
    pub alpha: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub split: SplitConfig,
}

impl RunConfig {
    pub fn new(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            tolerance_mm: DEFAULT_TOLERANCE_MM,
            margins: NonInferiorityMargin::default(),
            alpha: DEFAULT_ALPHA,
            n_resamples: DEFAULT_RESAMPLES,
            seed,
            out_dir: out_dir.into(),
            split: SplitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_mm.is_finite() && self.tolerance_mm >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be >= 0 mm, got {}", self.tolerance_mm)));
        }
        self.margins.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_resamples == 0 {
            return Err(Error::InvalidArgument("resample count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn report_options(&self, roles: &Roles) -> ReportOptions {
        ReportOptions {
            margins: self.margins,
            alpha: self.alpha,
            n_resamples: self.n_resamples,
            seed: self.seed,
            training_rater: roles.training_rater.clone(),
            test_raters: roles.test_raters.clone(),
            model: roles.model.clone(),
        }
    }
}
