use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, Roles};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pair, Flag, Metric, MetricRecord};
use crate::volgrid::{load_mask, BinaryMask};

/// Ordered rater pair: `pred` is evaluated against `reference`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RaterPair {
    pub pred: String,
    pub reference: String,
}

impl RaterPair {
    pub fn new(pred: impl Into<String>, reference: impl Into<String>) -> Self {
        RaterPair {
            pred: pred.into(),
            reference: reference.into(),
        }
    }

    /// Column label such as `"B to A"`.
    pub fn label(&self) -> String {
        format!("{} to {}", self.pred, self.reference)
    }
}

/// Per test expert X: `(X, training)` and `(X, model)`; then
/// `(training, model)`.
pub fn default_pairs(roles: &Roles) -> Vec<RaterPair> {
    let mut pairs = Vec::new();
    for x in &roles.test_raters {
        pairs.push(RaterPair::new(x, &roles.training_rater));
        pairs.push(RaterPair::new(x, &roles.model));
    }
    pairs.push(RaterPair::new(&roles.training_rater, &roles.model));
    pairs
}

/// One (case, pair) cell of the agreement table; also the CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub case_id: String,
    pub pred: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub tol_mm: f64,
    pub vs: Option<f64>,
    pub avd_ml: Option<f64>,
    pub dice: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub hd95_mm: Option<f64>,
    pub sdt: Option<f64>,
    pub pred_ml: Option<f64>,
    pub ref_ml: Option<f64>,
    /// Empty for fully defined rows; otherwise an emptiness flag or an
    /// exclusion reason prefixed with `excluded:`.
    pub note: String,
}

pub const EXCLUDED_PREFIX: &str = "excluded: ";

impl AgreementRow {
    fn from_record(case_id: &str, pair: &RaterPair, r: &MetricRecord) -> Self {
        let note = match r.flag(Metric::Dice) {
            Flag::Ok => String::new(),
            f => serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
        };
        AgreementRow {
            case_id: case_id.into(),
            pred: pair.pred.clone(),
            reference: pair.reference.clone(),
            tol_mm: r.tolerance_mm,
            vs: r.vs,
            avd_ml: r.avd_ml,
            dice: r.dice,
            precision: r.precision,
            recall: r.recall,
            hd95_mm: r.hd95_mm,
            sdt: r.sdt,
            pred_ml: Some(r.pred_ml),
            ref_ml: Some(r.ref_ml),
            note,
        }
    }

    fn excluded(case_id: &str, pair: &RaterPair, tol_mm: f64, reason: &str) -> Self {
        AgreementRow {
            case_id: case_id.into(),
            pred: pair.pred.clone(),
            reference: pair.reference.clone(),
            tol_mm,
            vs: None,
            avd_ml: None,
            dice: None,
            precision: None,
            recall: None,
            hd95_mm: None,
            sdt: None,
            pred_ml: None,
            ref_ml: None,
            note: format!("{EXCLUDED_PREFIX}{reason}"),
        }
    }

    pub fn pair(&self) -> RaterPair {
        RaterPair::new(&self.pred, &self.reference)
    }

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

    pub fn exclusion_reason(&self) -> Option<&str> {
        self.note.strip_prefix(EXCLUDED_PREFIX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub case_id: String,
    pub reason: String,
}

/// Metric values per case and rater pair, rows in case order then pair
/// order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
}

impl AgreementTable {
    /// Case ids in first-appearance order.
    pub fn case_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.case_id) && !out.contains(&r.case_id) {
                out.push(r.case_id.clone());
            }
        }
        out
    }

    /// Pairs in first-appearance order.
    pub fn pairs(&self) -> Vec<RaterPair> {
        let mut out: Vec<RaterPair> = Vec::new();
        for r in &self.rows {
            let p = r.pair();
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn has_pair(&self, pair: &RaterPair) -> bool {
        self.rows.iter().any(|r| r.pred == pair.pred && r.reference == pair.reference)
    }

    /// Values of `metric` for `pair`, aligned with [`Self::case_ids`]; cases
    /// without a row for the pair give `None`.
    pub fn column(&self, pair: &RaterPair, metric: Metric) -> Result<Vec<Option<f64>>> {
        if !self.has_pair(pair) {
            return Err(Error::InvalidArgument(format!("table has no column pair ({})", pair.label())));
        }
        let lookup: BTreeMap<&str, Option<f64>> = self
            .rows
            .iter()
            .filter(|r| r.pred == pair.pred && r.reference == pair.reference)
            .map(|r| (r.case_id.as_str(), r.get(metric)))
            .collect();
        Ok(self
            .case_ids()
            .iter()
            .map(|id| lookup.get(id.as_str()).copied().flatten())
            .collect())
    }

    /// One entry per excluded case.
    pub fn exclusions(&self) -> Vec<Exclusion> {
        let mut out: Vec<Exclusion> = Vec::new();
        for r in &self.rows {
            if let Some(reason) = r.exclusion_reason() {
                if !out.iter().any(|e| e.case_id == r.case_id) {
                    out.push(Exclusion {
                        case_id: r.case_id.clone(),
                        reason: reason.to_string(),
                    });
                }
            }
        }
        out
    }

    pub fn tolerance_mm(&self) -> Option<f64> {
        self.rows.first().map(|r| r.tol_mm)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<AgreementTable> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Manifest(format!("{}: {other:?}", path.display())),
        })?;
        let rows = rd.deserialize().collect::<std::result::Result<Vec<AgreementRow>, _>>()?;
        Ok(AgreementTable { rows })
    }
}

/// Evaluate every case of `manifest` for each pair (default pairs when
/// `pairs` is `None`). Cases whose masks cannot be loaded or disagree in
/// geometry are kept as excluded rows.
pub fn run_agreement_study(manifest: &Manifest, tol_mm: f64, pairs: Option<&[RaterPair]>) -> Result<AgreementTable> {
    crate::metrics::check_tolerance(tol_mm)?;
    let pairs: Vec<RaterPair> = match pairs {
        Some(p) => p.to_vec(),
        None => default_pairs(&manifest.roles),
    };
    for p in &pairs {
        for r in [&p.pred, &p.reference] {
            if !manifest.raters.contains(r) {
                return Err(Error::Manifest(format!("pair ({}) names unknown rater {r}", p.label())));
            }
        }
    }
    let per_case: Vec<Vec<AgreementRow>> = manifest
        .cases
        .par_iter()
        .map(|case| match evaluate_case(manifest, case, &pairs, tol_mm) {
            Ok(rows) => rows,
            Err(e) => {
                let reason = e.to_string();
                warn!("case {} excluded: {reason}", case.case_id);
                pairs
                    .iter()
                    .map(|p| AgreementRow::excluded(&case.case_id, p, tol_mm, &reason))
                    .collect()
            }
        })
        .collect();
    Ok(AgreementTable {
        rows: per_case.into_iter().flatten().collect(),
    })
}

fn evaluate_case(
    manifest: &Manifest,
    case: &super::manifest::CaseEntry,
    pairs: &[RaterPair],
    tol_mm: f64,
) -> Result<Vec<AgreementRow>> {
    let mut masks: BTreeMap<&str, BinaryMask> = BTreeMap::new();
    for p in pairs {
        for r in [&p.pred, &p.reference] {
            if masks.contains_key(r.as_str()) {
                continue;
            }
            let rel = case
                .mask_paths
                .get(r)
                .ok_or_else(|| Error::Manifest(format!("no mask for rater {r}")))?;
            masks.insert(r, load_mask(&manifest.resolve(rel))?);
        }
    }
    let mut geoms = masks.values().map(|m| m.geometry());
    if let Some(first) = geoms.next() {
        for g in geoms {
            first.ensure_compatible(g)?;
        }
    }
    pairs
        .iter()
        .map(|p| {
            let rec = evaluate_pair(&masks[p.pred.as_str()], &masks[p.reference.as_str()], tol_mm)?;
            Ok(AgreementRow::from_record(&case.case_id, p, &rec))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pair_order() {
        let labels: Vec<String> = default_pairs(&Roles::default()).iter().map(RaterPair::label).collect();
        assert_eq!(labels, ["B to A", "B to Model", "C to A", "C to Model", "A to Model"]);
    }

    fn row(case: &str, pred: &str, reference: &str, dice: Option<f64>) -> AgreementRow {
        AgreementRow {
            case_id: case.into(),
            pred: pred.into(),
            reference: reference.into(),
            tol_mm: 5.0,
            vs: Some(1.0),
            avd_ml: Some(0.0),
            dice,
            precision: None,
            recall: Some(0.25),
            hd95_mm: None,
            sdt: Some(1.0 / 3.0),
            pred_ml: Some(1.5),
            ref_ml: Some(2.0),
            note: String::new(),
        }
    }

    #[test]
    fn column_alignment_and_csv_round_trip() {
        let mut t = AgreementTable {
            rows: vec![
                row("p1", "B", "A", Some(0.5)),
                row("p2", "B", "A", None),
                row("p2", "B", "Model", Some(0.7)),
            ],
        };
        t.rows.push(AgreementRow::excluded("p3", &RaterPair::new("B", "A"), 5.0, "bad file"));
        assert_eq!(t.case_ids(), ["p1", "p2", "p3"]);
        let col = t.column(&RaterPair::new("B", "Model"), Metric::Dice).unwrap();
        assert_eq!(col, [None, Some(0.7), None]);
        assert!(t.column(&RaterPair::new("C", "A"), Metric::Dice).is_err());
        assert_eq!(t.exclusions(), [Exclusion { case_id: "p3".into(), reason: "bad file".into() }]);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        t.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(
            "case_id,pred,ref,tol_mm,vs,avd_ml,dice,precision,recall,hd95_mm,sdt,pred_ml,ref_ml,note\n"
        ));
        assert_eq!(AgreementTable::read_csv(&p).unwrap(), t);
    }
}
