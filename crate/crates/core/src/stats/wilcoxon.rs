//! One-sided Wilcoxon signed-rank test (alternative: median difference > 0).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quantile::average_ranks;

/// Largest sample size that uses the exact null distribution; larger
/// samples use the normal approximation.
pub const EXACT_MAX_N: usize = 49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRankTest {
    /// P(W+ >= observed) under the null.
    pub p: f64,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Nonzero differences that entered the test.
    pub n_used: usize,
    /// Zero differences dropped before ranking.
    pub n_zero: usize,
    pub method: PValueMethod,
}

/// Test H1: median(diff) > 0.
///
/// Zero differences are dropped; magnitudes are ranked with average ties.
/// Up to [`EXACT_MAX_N`] nonzero differences the p-value is exact under the
/// sign-flip null conditional on the observed (mid)ranks, which reduces to
/// the classical table when there are no ties.
pub fn wilcoxon_one_sided(diffs: &[f64]) -> Result<SignedRankTest> {
    if diffs.is_empty() {
        return Err(Error::InsufficientData("no differences to test".into()));
    }
    if let Some(bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite difference {bad}")));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n_zero = diffs.len() - nonzero.len();
    if nonzero.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = nonzero.len();
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let tie_term = tie_correction(&magnitudes);

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_conditional_upper_tail(&ranks, w_plus), PValueMethod::Exact)
    } else {
        (normal_upper_tail(n, w_plus, tie_term), PValueMethod::Normal)
    };
    Ok(SignedRankTest {
        p,
        w_plus,
        n_used: n,
        n_zero,
        method,
    })
}

/// Σ (t³ − t) over groups of tied magnitudes.
fn tie_correction(magnitudes: &[f64]) -> f64 {
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

/// Number of sign assignments of ranks `1..=n` giving each W+ value.
///
/// Index `w` holds the count for W+ = w; the sum is `2^n`.
pub fn signed_rank_counts(n: usize) -> Vec<u64> {
    assert!(n <= 62, "exact null distribution only supported for n <= 62");
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for k in 1..=n {
        reach += k;
        for w in (k..=reach).rev() {
            counts[w] += counts[w - k];
        }
    }
    counts
}

/// Exact P(W+ >= w) for a tie-free sample of size `n`.
pub fn exact_upper_tail(n: usize, w: u64) -> f64 {
    let counts = signed_rank_counts(n);
    let w = w as usize;
    if w >= counts.len() {
        return 0.0;
    }
    let tail: u64 = counts[w..].iter().sum();
    tail as f64 / 2f64.powi(n as i32)
}

/// Exact P(W+ >= w_plus) when each rank independently carries a random sign.
///
/// Midranks are multiples of 1/2, so the distribution is tabulated over
/// doubled ranks, which are integers.
pub fn exact_conditional_upper_tail(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    assert!(n <= 62, "exact null distribution only supported for n <= 62");
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &k in &doubled {
        reach += k;
        for w in (k..=reach).rev() {
            counts[w] += counts[w - k];
        }
    }
    let obs = (2.0 * w_plus).round() as usize;
    if obs > max {
        return 0.0;
    }
    let tail: u64 = counts[obs..].iter().sum();
    tail as f64 / 2f64.powi(n as i32)
}

/// Normal approximation to P(W+ >= w) with continuity correction and the
/// tie-corrected variance. `tie_term` is Σ (t³ − t) over tie groups.
pub fn normal_upper_tail(n: usize, w_plus: f64, tie_term: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return if w_plus > mean { 0.0 } else { 1.0 };
    }
    let z = (w_plus - mean - 0.5) / var.sqrt();
    Normal::standard().sf(z)
}
