use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::study::{AgreementTable, RaterPair};
use crate::error::{Error, Result};
use crate::stats::spearman_rho;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub case_id: String,
    /// Volume of the pair's first rater.
    pub rater_a_ml: f64,
    /// Volume of the pair's second rater.
    pub rater_b_ml: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSeries {
    pub pair: RaterPair,
    pub points: Vec<ScatterPoint>,
    /// `None` when the correlation is undefined; see `note`.
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Per-case volumes for each pair with Spearman's rho. Excluded cases are
/// skipped; a series with a constant volume vector is flagged, not fatal.
pub fn export_volume_scatter(table: &AgreementTable, pairs: &[RaterPair]) -> Result<Vec<ScatterSeries>> {
    pairs
        .iter()
        .map(|pair| {
            if !table.has_pair(pair) {
                return Err(Error::InvalidArgument(format!("table has no column pair ({})", pair.label())));
            }
            let points: Vec<ScatterPoint> = table
                .rows
                .iter()
                .filter(|r| r.pred == pair.pred && r.reference == pair.reference)
                .filter_map(|r| {
                    Some(ScatterPoint {
                        case_id: r.case_id.clone(),
                        rater_a_ml: r.pred_ml?,
                        rater_b_ml: r.ref_ml?,
                    })
                })
                .collect();
            if points.len() < 3 {
                return Err(Error::InsufficientData(format!(
                    "pair ({}) has {} cases with volumes, need at least 3",
                    pair.label(),
                    points.len()
                )));
            }
            let a: Vec<f64> = points.iter().map(|p| p.rater_a_ml).collect();
            let b: Vec<f64> = points.iter().map(|p| p.rater_b_ml).collect();
            let (rho, note) = match spearman_rho(&a, &b) {
                Ok(r) => (Some(r), None),
                Err(Error::Degenerate(_)) => (None, Some("degenerate: constant volume vector".to_string())),
                Err(e) => return Err(e),
            };
            Ok(ScatterSeries {
                pair: pair.clone(),
                points,
                rho,
                note,
            })
        })
        .collect()
}

fn file_stem(pair: &RaterPair) -> String {
    let clean = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>();
    format!("scatter_{}_to_{}", clean(&pair.pred), clean(&pair.reference))
}

/// One CSV per series plus `scatter_rho.csv`. Returns the files written.
pub fn write_scatter(series: &[ScatterSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for s in series {
        let path = dir.join(format!("{}.csv", file_stem(&s.pair)));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for p in &s.points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("scatter_rho.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["pred", "ref", "n", "rho", "note"])?;
    for s in series {
        w.write_record([
            s.pair.pred.clone(),
            s.pair.reference.clone(),
            s.points.len().to_string(),
            s.rho.map(|r| r.to_string()).unwrap_or_default(),
            s.note.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
