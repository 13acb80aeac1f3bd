//! Paired non-inferiority testing of model-expert against inter-expert
//! agreement.
//!
//! For patient `i` the shifted difference is
//! `d_i = model_i - inter_i + margin` for higher-is-better metrics and
//! `d_i = inter_i - model_i + margin` for lower-is-better metrics, and the
//! one-sided signed-rank test asks whether `median(d) > 0`.

use serde::{Deserialize, Serialize};

use super::holm::holm_adjust;
use super::wilcoxon::wilcoxon_one_sided;
use crate::error::{Error, Result};
use crate::metrics::Metric;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Shifted differences smaller than this (relative to the operands) are
/// treated as exact ties with zero.
pub const ZERO_DIFFERENCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricRange {
    /// Unit-interval score.
    BoundedUnit,
    /// Physical volume in ml.
    Millilitres,
    /// Physical distance in mm.
    Millimetres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricMeta {
    pub metric: Metric,
    pub direction: Direction,
    pub range: MetricRange,
}

impl MetricMeta {
    pub fn of(metric: Metric) -> Self {
        let (direction, range) = match metric {
            Metric::Avd => (Direction::LowerBetter, MetricRange::Millilitres),
            Metric::Hd95 => (Direction::LowerBetter, MetricRange::Millimetres),
            _ => (Direction::HigherBetter, MetricRange::BoundedUnit),
        };
        MetricMeta {
            metric,
            direction,
            range,
        }
    }
}

/// Largest tolerated deficit of model-expert agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonInferiorityMargin {
    /// Fraction of the unit metric range.
    pub bounded_unit: f64,
    pub avd_ml: f64,
    pub hd95_mm: f64,
}

impl Default for NonInferiorityMargin {
    fn default() -> Self {
        NonInferiorityMargin {
            bounded_unit: 0.2,
            avd_ml: 3.0,
            hd95_mm: 3.0,
        }
    }
}

impl NonInferiorityMargin {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bounded-unit", self.bounded_unit),
            ("AVD", self.avd_ml),
            ("HD95", self.hd95_mm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} margin must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn for_range(&self, range: MetricRange) -> f64 {
        match range {
            MetricRange::BoundedUnit => self.bounded_unit,
            MetricRange::Millilitres => self.avd_ml,
            MetricRange::Millimetres => self.hd95_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonInferiorityOutcome {
    pub metric: Metric,
    /// Pairs that entered the signed-rank test.
    pub n_pairs: usize,
    /// Pairs with an undefined value or a zero shifted difference.
    pub n_dropped: usize,
    /// `None` when every usable difference was zero.
    pub p_raw: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub significant: bool,
    pub margin_used: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl NonInferiorityOutcome {
    /// The p-value the decision rests on.
    pub fn decision_p(&self) -> Option<f64> {
        self.p_adjusted.or(self.p_raw)
    }
}

/// Run one non-inferiority test over per-patient agreement values.
///
/// `None` entries (undefined metrics) drop the pair.
pub fn noninferiority_test(
    model_agreement: &[Option<f64>],
    inter_agreement: &[Option<f64>],
    meta: MetricMeta,
    margins: &NonInferiorityMargin,
    alpha: f64,
) -> Result<NonInferiorityOutcome> {
    if model_agreement.len() != inter_agreement.len() {
        return Err(Error::InvalidArgument(format!(
            "paired lists differ in length: {} vs {}",
            model_agreement.len(),
            inter_agreement.len()
        )));
    }
    margins.validate()?;
    let margin = margins.for_range(meta.range);
    let pairs: Vec<(f64, f64)> = model_agreement
        .iter()
        .zip(inter_agreement)
        .filter_map(|(m, i)| Some(((*m)?, (*i)?)))
        .collect();
    let n_undefined = model_agreement.len() - pairs.len();
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: {} usable pairs, need at least 2",
            meta.metric.key(),
            pairs.len()
        )));
    }
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|&(m, i)| {
            let d = match meta.direction {
                Direction::HigherBetter => m - i + margin,
                Direction::LowerBetter => i - m + margin,
            };
            let scale = 1f64.max(m.abs()).max(i.abs()).max(margin);
            if d.abs() <= ZERO_DIFFERENCE_RTOL * scale {
                0.0
            } else {
                d
            }
        })
        .collect();

    match wilcoxon_one_sided(&diffs) {
        Ok(t) => Ok(NonInferiorityOutcome {
            metric: meta.metric,
            n_pairs: t.n_used,
            n_dropped: n_undefined + t.n_zero,
            p_raw: Some(t.p),
            p_adjusted: None,
            significant: t.p < alpha,
            margin_used: margin,
            warning: None,
        }),
        Err(Error::AllZeroDifferences) => Ok(NonInferiorityOutcome {
            metric: meta.metric,
            n_pairs: 0,
            n_dropped: model_agreement.len(),
            p_raw: None,
            p_adjusted: None,
            significant: false,
            margin_used: margin,
            warning: Some("all shifted differences are zero; test undefined".into()),
        }),
        Err(e) => Err(e),
    }
}

/// Holm-adjust a family of outcomes in place and re-derive significance.
/// Outcomes without a p-value are left non-significant. Returns the family
/// size used.
pub fn adjust_family(outcomes: &mut [NonInferiorityOutcome], alpha: f64) -> Result<usize> {
    let idx: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].p_raw.is_some()).collect();
    let raw: Vec<f64> = idx.iter().map(|&i| outcomes[i].p_raw.unwrap_or(1.0)).collect();
    let adjusted = holm_adjust(&raw)?;
    for (&i, p) in idx.iter().zip(adjusted) {
        outcomes[i].p_adjusted = Some(p);
        outcomes[i].significant = p < alpha;
    }
    Ok(idx.len())
}
