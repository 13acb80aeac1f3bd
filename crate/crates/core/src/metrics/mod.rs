//! Per-case agreement metrics between a predicted and a reference mask.
//!
//! Seven metrics are produced for every evaluated pair: volumetric
//! similarity (VS), absolute volume difference (AVD, ml), Dice, precision,
//! recall, the 95th-percentile Hausdorff distance (HD95, mm) and surface
//! Dice at tolerance (SDT).
//!
//! Empty masks follow one policy throughout. When both masks are empty the
//! volume and overlap metrics are perfect and the distance metrics are
//! undefined. When exactly one mask is empty the overlap metrics (and VS) are
//! zero and the distance metrics are undefined. SDT, being a bounded score,
//! follows the overlap rule. Every forced value carries a flag.

mod loss;
mod surface;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volgrid::{volume_ml, BinaryMask};

pub use loss::{dice_focal_loss, LossConfig, FOCAL_LOG_FLOOR, SOFT_DICE_SMOOTH};
pub use surface::{directed_distances, hd95, surface_dice_at_tolerance, surface_extract, SurfaceDistances, SurfaceSet};
pub(crate) use surface::check_tolerance;

/// Guard term of the volumetric similarity denominator, in ml.
pub const VS_EPSILON_ML: f64 = 1e-9;

/// Default surface tolerance in mm.
pub const DEFAULT_TOLERANCE_MM: f64 = 5.0;

/// Percentile used for the robust Hausdorff distance.
pub const HAUSDORFF_PERCENTILE: f64 = 95.0;

/// Voxelwise confusion counts of a prediction against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn pred_count(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn ref_count(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn emptiness(&self) -> Flag {
        Flag::from_counts(self.pred_count(), self.ref_count())
    }
}

pub fn confusion_counts(pred: &BinaryMask, reference: &BinaryMask) -> Result<ConfusionCounts> {
    pred.geometry().ensure_compatible(reference.geometry())?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &r) in pred.as_bytes().iter().zip(reference.as_bytes()) {
        match (p != 0, r != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let total = pred.as_bytes().len() as u64;
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn: total - tp - fp - fn_,
    })
}

/// Why a metric value is what it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Computed from the formula.
    Ok,
    /// Both masks empty; value forced by policy or undefined.
    BothEmpty,
    /// Exactly one mask empty; value forced by policy or undefined.
    OneEmpty,
}

impl Flag {
    pub fn from_counts(pred: u64, reference: u64) -> Flag {
        match (pred == 0, reference == 0) {
            (true, true) => Flag::BothEmpty,
            (true, false) | (false, true) => Flag::OneEmpty,
            (false, false) => Flag::Ok,
        }
    }
}

/// Values substituted for bounded metrics when a mask is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyPolicy {
    pub both_empty: f64,
    pub one_empty: f64,
}

impl Default for EmptyPolicy {
    fn default() -> Self {
        EmptyPolicy {
            both_empty: 1.0,
            one_empty: 0.0,
        }
    }
}

/// A metric value together with its flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub flag: Flag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapScores {
    pub dice: Scored,
    pub precision: Scored,
    pub recall: Scored,
}

pub fn overlap_metrics(c: &ConfusionCounts, policy: &EmptyPolicy) -> OverlapScores {
    let flag = c.emptiness();
    let forced = |value| Scored { value, flag };
    match flag {
        Flag::BothEmpty => OverlapScores {
            dice: forced(policy.both_empty),
            precision: forced(policy.both_empty),
            recall: forced(policy.both_empty),
        },
        Flag::OneEmpty => OverlapScores {
            dice: forced(policy.one_empty),
            precision: forced(policy.one_empty),
            recall: forced(policy.one_empty),
        },
        Flag::Ok => {
            let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
            OverlapScores {
                dice: forced(2.0 * tp / (2.0 * tp + fn_ + fp)),
                precision: forced(tp / (tp + fp)),
                recall: forced(tp / (tp + fn_)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeScores {
    pub vs: Scored,
    pub avd_ml: Scored,
    pub pred_ml: f64,
    pub ref_ml: f64,
}

/// Volumetric similarity and absolute volume difference from two volumes (ml).
pub fn volume_scores(pred_ml: f64, ref_ml: f64, flag: Flag, policy: &EmptyPolicy) -> VolumeScores {
    let diff = (pred_ml - ref_ml).abs();
    let vs = match flag {
        Flag::OneEmpty => policy.one_empty,
        _ => 1.0 - diff / (pred_ml + ref_ml + VS_EPSILON_ML),
    };
    VolumeScores {
        vs: Scored { value: vs, flag },
        avd_ml: Scored { value: diff, flag },
        pred_ml,
        ref_ml,
    }
}

pub fn volume_metrics(pred: &BinaryMask, reference: &BinaryMask) -> Result<VolumeScores> {
    pred.geometry().ensure_compatible(reference.geometry())?;
    let flag = Flag::from_counts(pred.count() as u64, reference.count() as u64);
    Ok(volume_scores(volume_ml(pred), volume_ml(reference), flag, &EmptyPolicy::default()))
}

/// The seven reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Vs,
    #[serde(rename = "avd_ml")]
    Avd,
    Dice,
    Precision,
    Recall,
    #[serde(rename = "hd95_mm")]
    Hd95,
    Sdt,
}

/// Row grouping used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    Volume,
    Overlap,
    Distance,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Vs,
        Metric::Avd,
        Metric::Dice,
        Metric::Precision,
        Metric::Recall,
        Metric::Hd95,
        Metric::Sdt,
    ];

    /// Field name in records and CSV headers.
    pub fn key(self) -> &'static str {
        match self {
            Metric::Vs => "vs",
            Metric::Avd => "avd_ml",
            Metric::Dice => "dice",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Hd95 => "hd95_mm",
            Metric::Sdt => "sdt",
        }
    }

    pub fn from_key(key: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.key() == key)
    }

    pub fn category(self) -> Category {
        match self {
            Metric::Vs | Metric::Avd => Category::Volume,
            Metric::Dice | Metric::Precision | Metric::Recall => Category::Overlap,
            Metric::Hd95 | Metric::Sdt => Category::Distance,
        }
    }

    /// True for the unit-range scores (VS, Dice, precision, recall, SDT).
    pub fn is_bounded(self) -> bool {
        !matches!(self, Metric::Avd | Metric::Hd95)
    }
}

/// Flags for every metric of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub vs: Flag,
    pub avd_ml: Flag,
    pub dice: Flag,
    pub precision: Flag,
    pub recall: Flag,
    pub hd95_mm: Flag,
    pub sdt: Flag,
}

/// All metrics of one evaluated (prediction, reference) pair. `None` encodes
/// an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub vs: Option<f64>,
    pub avd_ml: Option<f64>,
    pub dice: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub hd95_mm: Option<f64>,
    pub sdt: Option<f64>,
    pub flags: MetricFlags,
    pub pred_ml: f64,
    pub ref_ml: f64,
    pub counts: ConfusionCounts,
    pub tolerance_mm: f64,
}

impl MetricRecord {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Vs => self.vs,
            Metric::Avd => self.avd_ml,
            Metric::Dice => self.dice,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::Hd95 => self.hd95_mm,
            Metric::Sdt => self.sdt,
        }
    }

    pub fn flag(&self, metric: Metric) -> Flag {
        let f = &self.flags;
        match metric {
            Metric::Vs => f.vs,
            Metric::Avd => f.avd_ml,
            Metric::Dice => f.dice,
            Metric::Precision => f.precision,
            Metric::Recall => f.recall,
            Metric::Hd95 => f.hd95_mm,
            Metric::Sdt => f.sdt,
        }
    }
}

/// Evaluate every metric for `pred` against `reference`.
pub fn evaluate_pair(pred: &BinaryMask, reference: &BinaryMask, tol_mm: f64) -> Result<MetricRecord> {
    evaluate_pair_with(pred, reference, tol_mm, &EmptyPolicy::default())
}

pub fn evaluate_pair_with(
    pred: &BinaryMask,
    reference: &BinaryMask,
    tol_mm: f64,
    policy: &EmptyPolicy,
) -> Result<MetricRecord> {
    surface::check_tolerance(tol_mm)?;
    let counts = confusion_counts(pred, reference)?;
    let flag = counts.emptiness();
    let overlap = overlap_metrics(&counts, policy);
    let vol = volume_scores(volume_ml(pred), volume_ml(reference), flag, policy);

    let (hd, sdt) = match SurfaceDistances::between(&surface_extract(pred), &surface_extract(reference)) {
        Some(d) => (Some(d.hd95()), d.surface_dice(tol_mm)),
        None => (
            None,
            match flag {
                Flag::BothEmpty => policy.both_empty,
                _ => policy.one_empty,
            },
        ),
    };

    Ok(MetricRecord {
        vs: Some(vol.vs.value),
        avd_ml: Some(vol.avd_ml.value),
        dice: Some(overlap.dice.value),
        precision: Some(overlap.precision.value),
        recall: Some(overlap.recall.value),
        hd95_mm: hd,
        sdt: Some(sdt),
        flags: MetricFlags {
            vs: flag,
            avd_ml: flag,
            dice: flag,
            precision: flag,
            recall: flag,
            hd95_mm: flag,
            sdt: flag,
        },
        pred_ml: vol.pred_ml,
        ref_ml: vol.ref_ml,
        counts,
        tolerance_mm: tol_mm,
    })
}
