use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COHORT_SIZE: usize = 232;
pub const DEFAULT_TEST_SIZE: usize = 32;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test: Vec<String>,
    pub train: Vec<String>,
    /// Validation ids per fold; together they partition `train`.
    pub folds: Vec<Vec<String>>,
}

/// Seeded shuffle; the first `n_test` ids form the test set and the rest are
/// cut into `k_folds` contiguous chunks whose sizes differ by at most one
/// (earlier folds take the extra ids).
pub fn split_cohort(ids: &[String], n_test: usize, k_folds: usize, seed: u64) -> Result<SplitPlan> {
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::InvalidArgument(format!("duplicate id {dup}")));
    }
    if n_test >= ids.len() {
        return Err(Error::InvalidArgument(format!(
            "test size {n_test} must be smaller than the cohort ({})",
            ids.len()
        )));
    }
    let n_train = ids.len() - n_test;
    if k_folds == 0 || k_folds > n_train {
        return Err(Error::InvalidArgument(format!(
            "fold count {k_folds} must lie in 1..={n_train}"
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = shuffled.split_off(n_test);
    let (base, extra) = (n_train / k_folds, n_train % k_folds);
    let mut folds = Vec::with_capacity(k_folds);
    let mut start = 0;
    for f in 0..k_folds {
        let len = base + usize::from(f < extra);
        folds.push(train[start..start + len].to_vec());
        start += len;
    }
    Ok(SplitPlan {
        seed,
        test: shuffled,
        train,
        folds,
    })
}

/// Ids `"0".."n-1"`, for splits specified by count.
pub fn numbered_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}
