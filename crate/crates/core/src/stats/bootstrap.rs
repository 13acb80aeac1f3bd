use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{median_in_place, percentile_sorted};

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Percentile-bootstrap summary of a sample median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Largest deviation of a CI bound from the median; the single number
    /// printed after "±".
    pub half_width: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

impl BootstrapSummary {
    /// Summary from a median and interval computed elsewhere.
    pub fn from_interval(median: f64, ci_lo: f64, ci_hi: f64, n_resamples: usize, seed: u64) -> Self {
        let ci_lo = ci_lo.min(median);
        let ci_hi = ci_hi.max(median);
        BootstrapSummary {
            median,
            ci_lo,
            ci_hi,
            half_width: (median - ci_lo).max(ci_hi - median),
            n_resamples,
            seed,
        }
    }

    /// `"0.63 ± 0.16"` style rendering with `decimals` places.
    pub fn render(&self, decimals: usize) -> String {
        format!("{:.*} ± {:.*}", decimals, self.median, decimals, self.half_width)
    }
}

/// SplitMix64 finalizer; mixes `stream` into `seed` for derived seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 95% percentile-bootstrap CI of the median.
///
/// Draws `n_resamples` samples with replacement from a ChaCha8 stream seeded
/// by `seed`; the interval is the 2.5th / 97.5th percentile of the resampled
/// medians.
pub fn bootstrap_median_ci(values: &[f64], n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if values.is_empty() {
        return Err(Error::InsufficientData("bootstrap of an empty sample".into()));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be positive".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = crate::quantile::median_sorted(&sorted).expect("nonempty");

    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; n];
    let mut medians = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        for s in sample.iter_mut() {
            *s = values[rng.gen_range(0..n)];
        }
        medians.push(median_in_place(&mut sample).expect("nonempty"));
    }
    medians.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&medians, 2.5).expect("nonempty");
    let hi = percentile_sorted(&medians, 97.5).expect("nonempty");
    Ok(BootstrapSummary::from_interval(median, lo, hi, n_resamples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_single() {
        let s = bootstrap_median_ci(&[5.0; 4], 1000, 1).unwrap();
        assert_eq!((s.median, s.ci_lo, s.ci_hi, s.half_width), (5.0, 5.0, 5.0, 0.0));
        let s = bootstrap_median_ci(&[7.0], 1000, 1).unwrap();
        assert_eq!((s.median, s.ci_lo, s.ci_hi), (7.0, 7.0, 7.0));
        assert!(bootstrap_median_ci(&[], 1000, 1).is_err());
        assert!(bootstrap_median_ci(&[1.0], 0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let v: Vec<f64> = (0..32).map(|i| ((i * 37) % 11) as f64 / 3.0).collect();
        let a = bootstrap_median_ci(&v, 2000, 99).unwrap();
        let b = bootstrap_median_ci(&v, 2000, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_lo <= a.median && a.median <= a.ci_hi);
        assert_eq!(a.half_width, (a.median - a.ci_lo).max(a.ci_hi - a.median));
    }

    #[test]
    fn renders_half_width() {
        let s = BootstrapSummary::from_interval(0.63, 0.47, 0.79, 10_000, 0);
        assert_eq!(s.render(2), "0.63 ± 0.16");
        let s = BootstrapSummary::from_interval(8.40, 5.0, 13.65, 10_000, 0);
        assert_eq!(s.render(2), "8.40 ± 5.25");
    }
}
